#include "sievehom/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "sievehom/util.hpp"

namespace sievehom {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string key_name(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
}

double parse_double(const std::string& text, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        require(used == text.size(), "config: " + where + ": not a number: " + text);
        return v;
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception&) {
        throw ValidationError("config: " + where + ": not a number: " + text);
    }
}

}  // namespace

IniFile IniFile::parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "config: cannot read " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_string(text.str());
}

IniFile IniFile::parse_string(const std::string& text) {
    IniFile out;
    std::string section;
    std::size_t pos = 0;
    int lineno = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++lineno;
        if (line.empty() || line[0] == '#' || line[0] == ';') {
            if (pos > text.size()) break;
            continue;
        }
        if (line.front() == '[') {
            require(line.back() == ']', "config: line " + std::to_string(lineno) +
                                            ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            require(!section.empty(),
                    "config: line " + std::to_string(lineno) + ": empty section name");
        } else {
            const std::size_t eq = line.find('=');
            require(eq != std::string::npos,
                    "config: line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            require(!key.empty(), "config: line " + std::to_string(lineno) + ": empty key");
            require(!section.empty(),
                    "config: line " + std::to_string(lineno) + ": key outside any section");
            auto& sec = out.data_[section];
            require(!sec.count(key), "config: duplicate key " + key_name(section, key));
            sec[key] = trim(line.substr(eq + 1));
        }
        if (pos > text.size()) break;
    }
    return out;
}

bool IniFile::has(const std::string& section, const std::string& key) const {
    auto it = data_.find(section);
    return it != data_.end() && it->second.count(key) > 0;
}

const std::string& IniFile::get(const std::string& section, const std::string& key) const {
    auto it = data_.find(section);
    if (it != data_.end()) {
        auto kt = it->second.find(key);
        if (kt != it->second.end()) return kt->second;
    }
    throw ValidationError("config: missing required key " + key_name(section, key));
}

std::string IniFile::get_or(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

double IniFile::get_double(const std::string& section, const std::string& key) const {
    return parse_double(get(section, key), key_name(section, key));
}

double IniFile::get_double_or(const std::string& section, const std::string& key,
                              double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
}

long long IniFile::get_int_or(const std::string& section, const std::string& key,
                              long long fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& text = get(section, key);
    long long v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    require(res.ec == std::errc{} && res.ptr == text.data() + text.size(),
            "config: " + key_name(section, key) + ": not an integer: " + text);
    return v;
}

bool IniFile::get_bool_or(const std::string& section, const std::string& key,
                          bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& text = get(section, key);
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ValidationError("config: " + key_name(section, key) + ": not a boolean: " + text);
}

std::vector<double> IniFile::get_list(const std::string& section,
                                      const std::string& key) const {
    const std::string& text = get(section, key);
    std::vector<double> out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) out.push_back(parse_double(tok, key_name(section, key)));
    require(!out.empty(), "config: " + key_name(section, key) + ": empty list");
    return out;
}

std::vector<double> IniFile::get_list_or(const std::string& section, const std::string& key,
                                         const std::vector<double>& fallback) const {
    return has(section, key) ? get_list(section, key) : fallback;
}

std::vector<std::string> IniFile::sections() const {
    std::vector<std::string> out;
    for (const auto& [name, unused] : data_) out.push_back(name);
    return out;
}

std::vector<std::string> IniFile::keys(const std::string& section) const {
    std::vector<std::string> out;
    auto it = data_.find(section);
    if (it != data_.end())
        for (const auto& [key, unused] : it->second) out.push_back(key);
    return out;
}

}  // namespace sievehom
