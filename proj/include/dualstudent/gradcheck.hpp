#pragma once

// Central finite-difference checks of every differentiable op and of the full
// two-student loss.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace dualstudent::gradcheck {

inline constexpr double kOpThreshold = 1e-5;
inline constexpr double kCompositeThreshold = 1e-4;

struct Entry {
    std::string op;
    double max_rel_error = 0.0;
    double threshold = 0.0;
    std::size_t checked = 0;  // gradient entries compared
    bool passed = false;
};

struct Options {
    double step = 1e-6;
    /// Scales the analytic gradient of this op by 1.01; used to prove the
    /// check can fail.
    std::string corrupt_op;
};

struct Report {
    std::vector<Entry> entries;
    bool passed() const;
    /// First failing op, or empty.
    std::string first_failure() const;
};

/// Names in report order; the composite comes last.
std::vector<std::string> op_names();

/// |a − n| / max(|a|, |n|, 1e−4): relative where the gradient is sizeable,
/// absolute for entries near zero.
double relative_error(double analytic, double numeric);

Report run(const Options& options = {});

/// Header op,max_rel_error,threshold,checked,passed.
void write_csv(std::ostream& out, const Report& report);

}  // namespace dualstudent::gradcheck
