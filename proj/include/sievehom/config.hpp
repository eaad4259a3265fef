#pragma once

#include <map>
#include <string>
#include <vector>

namespace sievehom {

// INI-style plain text: `[section]` headers, `key = value` lines, `#` or `;`
// comments, blank lines ignored.  Keys and section names are
// case-sensitive; surrounding whitespace is trimmed.  Every lookup error
// names the offending `section.key`.
class IniFile {
  public:
    static IniFile parse_file(const std::string& path);
    static IniFile parse_string(const std::string& text);

    bool has(const std::string& section, const std::string& key) const;
    const std::string& get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;

    double get_double(const std::string& section, const std::string& key) const;
    double get_double_or(const std::string& section, const std::string& key,
                         double fallback) const;
    long long get_int_or(const std::string& section, const std::string& key,
                         long long fallback) const;
    bool get_bool_or(const std::string& section, const std::string& key, bool fallback) const;

    // whitespace-separated doubles
    std::vector<double> get_list(const std::string& section, const std::string& key) const;
    std::vector<double> get_list_or(const std::string& section, const std::string& key,
                                    const std::vector<double>& fallback) const;

    std::vector<std::string> sections() const;
    std::vector<std::string> keys(const std::string& section) const;

  private:
    std::map<std::string, std::map<std::string, std::string>> data_;
};

}  // namespace sievehom
