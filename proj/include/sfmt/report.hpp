#pragma once

#include <string>
#include <vector>

#include "sfmt/metrics.hpp"

namespace sfmt {

// A metrics block plus the name it is published under; the holistic aspect
// appears twice per evaluation (trained model vs aggregated from C/D/L), so
// the label is not always the aspect letter.
struct LabeledReport {
    std::string label;
    MetricsReport report;
};

// Full-fidelity JSON document: every metric, the confusion grid, warnings.
std::string reports_json(const std::vector<LabeledReport>& reports,
                         const std::vector<std::string>& warnings = {});

// One row per label x metric; the format round-trips exactly with the JSON
// values (17 significant digits).
std::string reports_csv(const std::vector<LabeledReport>& reports);

// Human-oriented table, one row per label.
std::string reports_text(const std::vector<LabeledReport>& reports,
                         const std::vector<std::string>& warnings = {});

// 8x8 grid, rows gold, columns predicted, with level-name headers.
std::string confusion_csv(const MetricsReport& report);

}  // namespace sfmt
