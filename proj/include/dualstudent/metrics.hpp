#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dualstudent {

/// One (run, epoch, metric, value) observation.
struct MetricsRow {
    std::string run_id;
    std::string method;
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
    std::string metric;
    double value = 0.0;

    friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

/// "%.17g"
std::string format_real(double v);

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(std::istream& in);
void save_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> load_metrics_csv(const std::string& path);

/// Value of `metric` at the largest epoch present; throws InputError if absent.
double final_value(const std::vector<MetricsRow>& rows, const std::string& metric);
/// Values of `metric` ordered by epoch.
std::vector<double> trace(const std::vector<MetricsRow>& rows, const std::string& metric);

}  // namespace dualstudent
