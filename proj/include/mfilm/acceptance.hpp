#pragma once

#include <string>
#include <utility>
#include <vector>

namespace mfilm {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    /// Measured values and thresholds, in a fixed order.
    std::vector<std::pair<std::string, double>> measured;
    std::string detail;
    double seconds = 0.0; ///< wall time; not part of the JSON report
};

struct AcceptanceOptions {
    /// Criteria to run (1..12); empty runs all of them.
    std::vector<int> only;
    /// Added to Phi wherever a criterion evaluates the closed-form side of an
    /// identity. Nonzero values exist to check that the suite detects errors.
    double phi_offset = 0.0;
};

/// Runs the acceptance criteria at their stated scale, in id order.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options = {});

/// Machine-readable report with one entry per criterion. Wall times are
/// omitted so that reports of repeated runs compare byte-for-byte; a nonempty
/// `timestamp` is recorded as `generated_at`.
std::string acceptance_report_json(const std::vector<CriterionResult>& results, const std::string& timestamp = "");

/// One line per criterion: "PASS 3 name: key=value ...".
std::string acceptance_summary_line(const CriterionResult& result);

} // namespace mfilm
