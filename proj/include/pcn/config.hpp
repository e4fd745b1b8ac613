#pragma once

#include <map>
#include <string>
#include <vector>

namespace pcn {

// key=value text, one pair per line; '#' starts a comment. Used for CLI
// config files and as the checkpoint footer. Keys stay in insertion order
// so serialization is reproducible.
class KvText {
 public:
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& dflt) const;
  const std::vector<std::pair<std::string, std::string>>& items() const {
    return items_;
  }

  std::string serialize() const;
  static KvText parse(const std::string& text);
  static KvText read_file(const std::string& path);

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

}  // namespace pcn
