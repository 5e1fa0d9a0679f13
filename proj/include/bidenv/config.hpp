#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace bidenv {

// Flat key=value run configuration. `[section]` headers prefix the keys that
// follow ("[train]" + "lr = 1e-4" becomes "train.lr"), '#' starts a comment,
// duplicate keys are rejected. Writing serializes a canonical, diffable form
// (sections and keys sorted) so a run can be reproduced from the file alone.
class Config {
  public:
    static Config parse_string(const std::string& text, const std::string& origin = "<string>");
    static Config parse_file(const std::string& path);

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    // typed getters; the default is returned when the key is absent and a
    // DataError is thrown when the value does not parse
    std::string get_str(const std::string& key, const std::string& def) const;
    double get_double(const std::string& key, double def) const;
    int get_int(const std::string& key, int def) const;
    long get_long(const std::string& key, long def) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;
    bool get_bool(const std::string& key, bool def) const;
    // comma-separated lists; an absent or empty value gives the default
    std::vector<double> get_doubles(const std::string& key,
                                    const std::vector<double>& def) const;
    std::vector<int> get_ints(const std::string& key, const std::vector<int>& def) const;

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }

    // throws DataError naming every key that is not in `known`
    void require_known(const std::vector<std::string>& known) const;

    std::string serialize() const;
    void write(const std::string& path) const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

  private:
    const std::string* find(const std::string& key) const;

    std::map<std::string, std::string> kv_;
};

}  // namespace bidenv
