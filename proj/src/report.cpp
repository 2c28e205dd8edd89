#include "sfmt/report.hpp"

#include <cstdio>

#include "json.hpp"

namespace sfmt {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json report_node(const LabeledReport& lr) {
    const MetricsReport& r = lr.report;
    ordered_json j;
    j["label"] = lr.label;
    j["aspect"] = std::string(1, r.aspect);
    j["n"] = r.n;
    j["pcc_defined"] = r.pcc_defined;
    j["pcc"] = r.pcc;
    j["rmse"] = r.rmse;
    j["abs_acc"] = r.abs_acc;
    j["adj_acc"] = r.adj_acc;
    j["macro_acc"] = r.macro_acc;
    j["acc_within_0.5"] = r.acc_within_05;
    j["acc_within_1.0"] = r.acc_within_10;
    ordered_json rows = ordered_json::array();
    for (const auto& row : r.confusion) rows.push_back(row);
    j["confusion"] = rows;
    return j;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%7.4f", v);
    return buf;
}

}  // namespace

std::string reports_json(const std::vector<LabeledReport>& reports,
                         const std::vector<std::string>& warnings) {
    ordered_json doc;
    doc["reports"] = ordered_json::array();
    for (const auto& lr : reports) doc["reports"].push_back(report_node(lr));
    doc["warnings"] = warnings;
    return doc.dump(2) + "\n";
}

std::string reports_csv(const std::vector<LabeledReport>& reports) {
    std::string out = "label,metric,value\n";
    for (const auto& lr : reports) {
        const MetricsReport& r = lr.report;
        auto row = [&](const char* metric, double v) {
            out += lr.label;
            out += ',';
            out += metric;
            out += ',';
            out += fmt17(v);
            out += '\n';
        };
        row("n", static_cast<double>(r.n));
        row("pcc", r.pcc_defined ? r.pcc : std::nan(""));
        row("rmse", r.rmse);
        row("abs_acc", r.abs_acc);
        row("adj_acc", r.adj_acc);
        row("macro_acc", r.macro_acc);
        row("acc_within_0.5", r.acc_within_05);
        row("acc_within_1.0", r.acc_within_10);
    }
    return out;
}

std::string reports_text(const std::vector<LabeledReport>& reports,
                         const std::vector<std::string>& warnings) {
    std::string out = "label         n     pcc    rmse     abs     adj   macro  within0.5  within1.0\n";
    for (const auto& lr : reports) {
        const MetricsReport& r = lr.report;
        char head[32];
        std::snprintf(head, sizeof(head), "%-9s %5zu ", lr.label.c_str(), r.n);
        out += head;
        out += r.pcc_defined ? fmt4(r.pcc) : std::string("    n/a");
        out += fmt4(r.rmse);
        out += fmt4(r.abs_acc);
        out += fmt4(r.adj_acc);
        out += fmt4(r.macro_acc);
        out += "  " + fmt4(r.acc_within_05);
        out += "   " + fmt4(r.acc_within_10);
        out += '\n';
    }
    for (const auto& w : warnings) out += "warning: " + w + "\n";
    return out;
}

std::string confusion_csv(const MetricsReport& report) {
    std::string out = "gold\\pred";
    for (int c = 0; c < 8; ++c) out += std::string(",") + level_name(c);
    out += '\n';
    for (int g = 0; g < 8; ++g) {
        out += level_name(g);
        for (int c = 0; c < 8; ++c)
            out += "," + std::to_string(report.confusion[static_cast<size_t>(g)][static_cast<size_t>(c)]);
        out += '\n';
    }
    return out;
}

}  // namespace sfmt
