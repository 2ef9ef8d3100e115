#include "dualstudent/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "dualstudent/errors.hpp"

namespace dualstudent {

namespace {
constexpr const char* kHeader = "run_id,method,seed,epoch,metric,value";
}

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
    out << kHeader << '\n';
    for (const MetricsRow& r : rows) {
        out << r.run_id << ',' << r.method << ',' << r.seed << ',' << r.epoch << ',' << r.metric << ','
            << format_real(r.value) << '\n';
    }
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kHeader) throw InputError("metrics csv: unexpected header");
    std::vector<MetricsRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::vector<std::string> cells;
        for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
        if (cells.size() != 6) throw InputError("metrics csv: line " + std::to_string(line_no) + " malformed");
        MetricsRow row{cells[0], cells[1], 0, 0, cells[4], 0.0};
        const auto number = [&](const std::string& cell, auto& out) {
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), out);
            if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
                throw InputError("metrics csv: bad number on line " + std::to_string(line_no));
            }
        };
        number(cells[2], row.seed);
        number(cells[3], row.epoch);
        number(cells[5], row.value);
        rows.push_back(std::move(row));
    }
    return rows;
}

void save_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_metrics_csv(out, rows);
    if (!out) throw IoError("failed writing " + path);
}

std::vector<MetricsRow> load_metrics_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    return read_metrics_csv(in);
}

double final_value(const std::vector<MetricsRow>& rows, const std::string& metric) {
    const MetricsRow* best = nullptr;
    for (const MetricsRow& r : rows) {
        if (r.metric == metric && (!best || r.epoch >= best->epoch)) best = &r;
    }
    if (!best) throw InputError("metric '" + metric + "' not found");
    return best->value;
}

std::vector<double> trace(const std::vector<MetricsRow>& rows, const std::string& metric) {
    std::map<std::size_t, double> by_epoch;
    for (const MetricsRow& r : rows) {
        if (r.metric == metric) by_epoch[r.epoch] = r.value;
    }
    std::vector<double> out;
    out.reserve(by_epoch.size());
    for (const auto& [epoch, value] : by_epoch) out.push_back(value);
    return out;
}

}  // namespace dualstudent
