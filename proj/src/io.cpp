#include "shapeagg/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace shapeagg {

Sequence read_sequence_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    std::vector<double> values;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line == "value") continue;  // header optional on input
        }
        values.push_back(std::stod(line));
    }
    if (values.empty()) throw std::runtime_error("no values in " + path);
    return Sequence(std::move(values));
}

void write_sequence_csv(const std::string& path, const Sequence& seq) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "value\n";
    for (std::size_t i = 0; i < seq.size(); ++i) out << format_double(seq[i]) << "\n";
}

Sequence read_sequence_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    if (!j.is_array()) throw std::runtime_error(path + ": expected a JSON array of numbers");
    std::vector<double> values;
    values.reserve(j.size());
    for (const auto& v : j) values.push_back(v.get<double>());
    return Sequence(std::move(values));
}

void write_sequence_json(const std::string& path, const Sequence& seq) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "[";
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i) out << ",";
        out << format_double(seq[i]);
    }
    out << "]\n";
}

Sequence read_sequence(const std::string& path) {
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json")
        return read_sequence_json(path);
    return read_sequence_csv(path);
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace shapeagg
