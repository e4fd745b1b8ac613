#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pcn/analysis.hpp"
#include "pcn/block.hpp"
#include "pcn/checkpoint.hpp"
#include "pcn/data.hpp"
#include "pcn/gradcheck.hpp"
#include "pcn/parallel.hpp"
#include "pcn/trainer.hpp"

namespace py = pybind11;

namespace {

template <class T>
using arr_t = py::array_t<T, py::array::c_style>;

template <class T>
pcn::TensorT<T> to_tensor(const arr_t<T>& arr) {
  pcn::Shape shape(static_cast<size_t>(arr.ndim()));
  for (py::ssize_t i = 0; i < arr.ndim(); ++i)
    shape[static_cast<size_t>(i)] = arr.shape(i);
  std::vector<T> data(arr.data(), arr.data() + arr.size());
  return pcn::TensorT<T>(std::move(shape), std::move(data));
}

template <class T>
py::array_t<T> to_array(const pcn::TensorT<T>& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<T> arr(shape);
  std::copy(t.data(), t.data() + t.numel(), arr.mutable_data());
  return arr;
}

// Stateless single-op entry points (both float32 and float64).
template <class T>
void bind_ops(py::module_& m) {
  m.def("conv2d", [](const arr_t<T>& x, const arr_t<T>& w, int64_t stride,
                     int64_t pad) {
    return to_array(pcn::kernels::conv2d_forward(to_tensor(x), to_tensor(w),
                                                 stride, pad));
  },
        py::arg("x"), py::arg("w"), py::arg("stride") = 1, py::arg("pad") = 1);
  m.def("conv_transpose2d", [](const arr_t<T>& x, const arr_t<T>& w) {
    pcn::TensorT<T> xt = to_tensor(x);
    pcn::TensorT<T> wt = to_tensor(w);
    const int64_t k = wt.dim(2);
    return to_array(pcn::kernels::conv2d_input_grad(xt, wt, 1, (k - 1) / 2,
                                                    xt.dim(2), xt.dim(3)));
  },
        py::arg("x"), py::arg("w"));
  m.def("relu", [](const arr_t<T>& x) {
    return to_array(pcn::kernels::relu_forward(to_tensor(x)));
  });
  m.def("maxpool2", [](const arr_t<T>& x) {
    std::vector<int64_t> argmax;
    return to_array(pcn::kernels::maxpool2_forward(to_tensor(x), argmax));
  });
  m.def("global_avg_pool", [](const arr_t<T>& x) {
    return to_array(pcn::kernels::global_avg_pool_forward(to_tensor(x)));
  });
  m.def("linear", [](const arr_t<T>& x, const arr_t<T>& w, const arr_t<T>& b) {
    return to_array(
        pcn::kernels::linear_forward(to_tensor(x), to_tensor(w), to_tensor(b)));
  });
  m.def("batchnorm_train",
        [](const arr_t<T>& x, const arr_t<T>& gamma, const arr_t<T>& beta,
           double eps) {
          pcn::TensorT<T> y, mean, var;
          pcn::kernels::batchnorm_train_forward(to_tensor(x), to_tensor(gamma),
                                                to_tensor(beta), eps, y, mean,
                                                var);
          return py::make_tuple(to_array(y), to_array(mean), to_array(var));
        },
        py::arg("x"), py::arg("gamma"), py::arg("beta"),
        py::arg("eps") = 1e-5);
  m.def("batchnorm_eval",
        [](const arr_t<T>& x, const arr_t<T>& gamma, const arr_t<T>& beta,
           const arr_t<T>& mean, const arr_t<T>& var, double eps) {
          return to_array(pcn::kernels::batchnorm_eval_forward(
              to_tensor(x), to_tensor(gamma), to_tensor(beta), to_tensor(mean),
              to_tensor(var), eps));
        },
        py::arg("x"), py::arg("gamma"), py::arg("beta"), py::arg("mean"),
        py::arg("var"), py::arg("eps") = 1e-5);
  m.def("softmax_cross_entropy",
        [](const arr_t<T>& logits, const std::vector<int>& labels) {
          pcn::TensorT<T> probs =
              pcn::kernels::softmax_forward(to_tensor(logits));
          double loss = pcn::kernels::cross_entropy_from_probs(probs, labels);
          return py::make_tuple(loss, to_array(probs));
        },
        py::arg("logits"), py::arg("labels"));
  m.def("pc_block_forward",
        [](const arr_t<T>& x, const arr_t<T>& ff, const arr_t<T>& fb,
           const arr_t<T>& bp, const arr_t<T>& alpha, int cycles, bool pool,
           bool trace) {
          pcn::PcBlockParamsT<T> params;
          params.ff = to_tensor(ff);
          params.fb = to_tensor(fb);
          params.bp = to_tensor(bp);
          params.alpha = to_tensor(alpha);
          params.bn = pcn::BatchNormStateT<T>::make(params.c_in());
          params.pool_after = pool;
          pcn::Tape<T> tape;
          tape.grad_enabled = false;
          pcn::PcBlockVars<T> vars = pcn::bind_block(tape, params, false);
          pcn::BlockTraceT<T> tr;
          pcn::Var<T> y =
              pcn::pc_block_forward(tape.leaf(to_tensor(x), false), vars,
                                    params, cycles, true, trace ? &tr : nullptr);
          py::list r, p, e;
          for (auto& t : tr.r) r.append(to_array(t));
          for (auto& t : tr.p) p.append(to_array(t));
          for (auto& t : tr.e) e.append(to_array(t));
          return py::make_tuple(to_array(y.value()), r, p, e);
        },
        py::arg("x"), py::arg("ff"), py::arg("fb"), py::arg("bp"),
        py::arg("alpha"), py::arg("cycles"), py::arg("pool") = false,
        py::arg("trace") = false,
        "One recurrent block under train-mode batch norm; returns "
        "(y, r_list, p_list, e_list).");
}

pcn::Dataset dataset_from_arrays(const arr_t<float>& images,
                                 const std::vector<int>& labels,
                                 int num_classes) {
  pcn::Dataset ds;
  ds.images = to_tensor(images);
  ds.labels = labels;
  ds.num_classes = num_classes;
  ds.normalized = true;  // caller-normalized data passes straight through
  return ds;
}

}  // namespace

PYBIND11_MODULE(_pcn, m) {
  m.doc() = "Predictive-coding network engine (C++ core)";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const pcn::IoError& e) {
      PyErr_SetString(PyExc_OSError, e.what());
    } catch (const pcn::ShapeError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const pcn::ContractError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const pcn::ConfigError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const pcn::Error& e) {
      PyErr_SetString(PyExc_RuntimeError, e.what());
    }
  });

  bind_ops<double>(m);
  bind_ops<float>(m);

  m.def("set_num_threads", &pcn::set_num_threads, py::arg("n"));

  py::class_<pcn::Model>(m, "Model")
      .def_static("build_pcn",
                  [](const std::string& arch, int cycles, int classes,
                     uint64_t seed) {
                    return pcn::build_pcn<float>(pcn::arch_from_string(arch),
                                                 cycles, classes, seed);
                  },
                  py::arg("arch"), py::arg("cycles"), py::arg("classes") = 10,
                  py::arg("seed") = 0)
      .def_static("build_plain",
                  [](const std::string& arch, int classes, uint64_t seed) {
                    return pcn::build_plain<float>(pcn::arch_from_string(arch),
                                                   classes, seed);
                  },
                  py::arg("arch"), py::arg("classes") = 10, py::arg("seed") = 0)
      .def_static("load", &pcn::load_checkpoint, py::arg("path"))
      .def("save",
           [](pcn::Model& self, const std::string& path) {
             pcn::save_checkpoint(self, path);
           },
           py::arg("path"))
      .def_property_readonly(
          "arch",
          [](const pcn::Model& self) { return arch_to_string(self.spec.arch); })
      .def_property_readonly(
          "cycles", [](const pcn::Model& self) { return self.spec.cycles; })
      .def_property_readonly(
          "classes",
          [](const pcn::Model& self) { return self.spec.num_classes; })
      .def_property_readonly(
          "plain", [](const pcn::Model& self) { return self.spec.plain; })
      .def("param_count",
           [](const pcn::Model& self) { return pcn::param_count(self.spec); })
      .def("forward",
           [](pcn::Model& self, const arr_t<float>& batch, int cycles) {
             return to_array(
                 pcn::forward_logits(self, to_tensor(batch), cycles));
           },
           py::arg("batch"), py::arg("cycles") = -1,
           "Eval-mode logits; cycles >= 0 overrides the stored count.")
      .def("evaluate",
           [](pcn::Model& self, const arr_t<float>& images,
              const std::vector<int>& labels, int cycles) {
             pcn::Dataset ds = dataset_from_arrays(images, labels,
                                                   self.spec.num_classes);
             return pcn::evaluate(self, ds, 256, 0, cycles);
           },
           py::arg("images"), py::arg("labels"), py::arg("cycles") = -1)
      .def("saliency_map",
           [](pcn::Model& self, const arr_t<float>& image, int cycles) {
             return to_array(
                 pcn::saliency_map(self, to_tensor(image), cycles));
           },
           py::arg("image"), py::arg("cycles") = -1)
      .def("error_trajectory",
           [](pcn::Model& self, const arr_t<float>& images, int cycles) {
             std::vector<int> labels(static_cast<size_t>(images.shape(0)), 0);
             pcn::Dataset ds = dataset_from_arrays(images, labels,
                                                   self.spec.num_classes);
             pcn::AnalysisMatrix mt = pcn::error_trajectory(self, ds, cycles);
             py::array_t<double> out({mt.layers, mt.cycles});
             std::copy(mt.values.begin(), mt.values.end(), out.mutable_data());
             return out;
           },
           py::arg("images"), py::arg("cycles"))
      .def("cosine_diagnostic",
           [](pcn::Model& self, const arr_t<float>& images,
              const std::vector<int>& labels, int cycles) {
             pcn::Dataset ds = dataset_from_arrays(images, labels,
                                                   self.spec.num_classes);
             pcn::AnalysisMatrix mt = pcn::cosine_diagnostic(self, ds, cycles);
             py::array_t<double> out({mt.layers, mt.cycles});
             std::copy(mt.values.begin(), mt.values.end(), out.mutable_data());
             return out;
           },
           py::arg("images"), py::arg("labels"), py::arg("cycles"));

  m.def("param_count",
        [](const std::string& arch, int classes, bool plain) {
          return pcn::param_count(pcn::ModelSpec::make(
              pcn::arch_from_string(arch), plain ? 0 : 1, classes, plain));
        },
        py::arg("arch"), py::arg("classes"), py::arg("plain") = false);

  m.def("synthetic_dataset",
        [](int classes, int64_t n, uint64_t seed) {
          pcn::Dataset ds = pcn::synthetic_dataset(classes, n, seed);
          py::array_t<int> labels(static_cast<py::ssize_t>(n));
          std::copy(ds.labels.begin(), ds.labels.end(), labels.mutable_data());
          return py::make_tuple(to_array(ds.images), labels);
        },
        py::arg("classes"), py::arg("n"), py::arg("seed") = 0);

  m.def("gradcheck_ops",
        [](uint64_t seed, int seeds) {
          return pcn::gradcheck_ops(seed, seeds).worst();
        },
        py::arg("seed") = 0, py::arg("seeds") = 2,
        "Worst relative error across the per-op finite-difference checks.");
}
