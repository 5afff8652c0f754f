#ifndef VCM_CSV_HPP
#define VCM_CSV_HPP

#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "util.hpp"

// Plain comma-separated tables: no quoting, one header row. All the file
// formats produced here keep identifiers comma-free, which is validated at
// manifest load.
namespace vcm::csvio {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    static constexpr size_t npos = size_t(-1);

    size_t column(const std::string& name) const {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        return npos;
    }
};

inline Table read_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::Io, "cannot open '" + path + "' for reading");
    Table t;
    std::string line;
    if (!std::getline(in, line)) raise(ErrorKind::Format, "'" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    t.header = util::split(line, ',');
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = util::split(line, ',');
        if (fields.size() != t.header.size())
            raise(ErrorKind::Format, path + ":" + std::to_string(line_no) + ": expected " +
                                         std::to_string(t.header.size()) + " fields, got " +
                                         std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
    }
    return t;
}

inline double parse_double(const std::string& field, const std::string& context) {
    const std::string s = util::trim(field);
    if (s.empty()) raise(ErrorKind::Format, context + ": empty numeric field");
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size())
        raise(ErrorKind::Format, context + ": non-numeric value '" + field + "'");
    return v;
}

} // namespace vcm::csvio

#endif
