#include "bidenv/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

#include "bidenv/errors.hpp"

namespace bidenv {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

Config Config::parse_string(const std::string& text, const std::string& origin) {
    Config cfg;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto where = [&] { return origin + " line " + std::to_string(line_no); };
        if (line.front() == '[') {
            if (line.back() != ']')
                throw DataError(where() + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (!valid_name(section)) throw DataError(where() + ": bad section name");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError(where() + ": expected key = value, got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (!valid_name(key)) throw DataError(where() + ": bad key name '" + key + "'");
        std::string full = section.empty() ? key : section + "." + key;
        if (!cfg.kv_.emplace(full, value).second)
            throw DataError(where() + ": duplicate key '" + full + "'");
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("config: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_string(ss.str(), path);
}

const std::string* Config::find(const std::string& key) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? nullptr : &it->second;
}

std::string Config::get_str(const std::string& key, const std::string& def) const {
    const std::string* v = find(key);
    return v ? *v : def;
}

double Config::get_double(const std::string& key, double def) const {
    const std::string* v = find(key);
    if (!v) return def;
    try {
        std::size_t used = 0;
        double d = std::stod(*v, &used);
        if (used != v->size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw DataError("config: " + key + " = '" + *v + "' is not a number");
    }
}

long Config::get_long(const std::string& key, long def) const {
    const std::string* v = find(key);
    if (!v) return def;
    long out = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || p != v->data() + v->size())
        throw DataError("config: " + key + " = '" + *v + "' is not an integer");
    return out;
}

int Config::get_int(const std::string& key, int def) const {
    long v = get_long(key, def);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
        throw DataError("config: " + key + " is out of range");
    return static_cast<int>(v);
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t def) const {
    const std::string* v = find(key);
    if (!v) return def;
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || p != v->data() + v->size())
        throw DataError("config: " + key + " = '" + *v + "' is not a non-negative integer");
    return out;
}

bool Config::get_bool(const std::string& key, bool def) const {
    const std::string* v = find(key);
    if (!v) return def;
    if (*v == "true" || *v == "1") return true;
    if (*v == "false" || *v == "0") return false;
    throw DataError("config: " + key + " = '" + *v + "' is not a boolean");
}

std::vector<double> Config::get_doubles(const std::string& key,
                                        const std::vector<double>& def) const {
    const std::string* v = find(key);
    if (!v || trim(*v).empty()) return def;
    std::vector<double> out;
    for (const std::string& item : split_list(*v)) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw DataError("config: " + key + " contains non-number '" + item + "'");
        }
    }
    return out;
}

std::vector<int> Config::get_ints(const std::string& key, const std::vector<int>& def) const {
    const std::string* v = find(key);
    if (!v || trim(*v).empty()) return def;
    std::vector<int> out;
    for (const std::string& item : split_list(*v)) {
        int x = 0;
        auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
        if (ec != std::errc() || p != item.data() + item.size())
            throw DataError("config: " + key + " contains non-integer '" + item + "'");
        out.push_back(x);
    }
    return out;
}

void Config::require_known(const std::vector<std::string>& known) const {
    std::string bad;
    for (const auto& [key, value] : kv_)
        if (std::find(known.begin(), known.end(), key) == known.end())
            bad += (bad.empty() ? "" : ", ") + key;
    if (!bad.empty()) throw DataError("config: unknown keys: " + bad);
}

std::string Config::serialize() const {
    // bare keys first (they must precede any section header to round-trip),
    // then sections; std::map order keeps each section's keys contiguous
    std::ostringstream out;
    bool first = true;
    for (const auto& [key, value] : kv_)
        if (key.find('.') == std::string::npos) {
            out << key << " = " << value << "\n";
            first = false;
        }
    std::string section;
    for (const auto& [key, value] : kv_) {
        auto dot = key.find('.');
        if (dot == std::string::npos) continue;
        std::string sec = key.substr(0, dot);
        if (sec != section) {
            if (!first) out << "\n";
            out << "[" << sec << "]\n";
            section = sec;
        }
        out << key.substr(dot + 1) << " = " << value << "\n";
        first = false;
    }
    return out.str();
}

void Config::write(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw DataError("config: cannot write " + path);
    f << serialize();
    if (!f) throw DataError("config: write failed for " + path);
}

}  // namespace bidenv
