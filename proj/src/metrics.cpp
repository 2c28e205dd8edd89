#include "sfmt/metrics.hpp"

#include <cmath>

namespace sfmt {

namespace {

constexpr double kAdjSlack = 1e-12;

void require_nonempty(const PredictionSet& ps) {
    if (ps.size() == 0) throw MetricError("empty prediction set");
}

}  // namespace

double pcc(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw DimError("pcc: length mismatch " + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()));
    size_t n = a.size();
    if (n < 2) throw MetricError("pcc: need at least two pairs");
    double ma = 0, mb = 0;
    for (size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double saa = 0, sbb = 0, sab = 0;
    for (size_t i = 0; i < n; ++i) {
        double da = a[i] - ma, db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa == 0.0 || sbb == 0.0)
        throw MetricError("pcc: undefined for a constant vector");
    return sab / std::sqrt(saa * sbb);
}

double rmse(const std::vector<double>& pred, const std::vector<double>& gold) {
    if (pred.size() != gold.size())
        throw DimError("rmse: length mismatch " + std::to_string(pred.size()) + " vs " +
                       std::to_string(gold.size()));
    if (pred.empty()) throw MetricError("rmse: empty input");
    double s = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - gold[i];
        s += d * d;
    }
    return std::sqrt(s / pred.size());
}

double abs_accuracy(const PredictionSet& ps) {
    require_nonempty(ps);
    size_t hit = 0;
    for (size_t i = 0; i < ps.size(); ++i)
        if (ps.preds()[i] == ps.golds()[i]) ++hit;
    return static_cast<double>(hit) / ps.size();
}

double adj_accuracy(const PredictionSet& ps) { return acc_within(ps, 0.5); }

double macro_accuracy(const PredictionSet& ps) {
    require_nonempty(ps);
    std::array<int, 8> hit{}, total{};
    for (size_t i = 0; i < ps.size(); ++i) {
        int g = ps.golds()[i];
        ++total[static_cast<size_t>(g)];
        if (ps.preds()[i] == g) ++hit[static_cast<size_t>(g)];
    }
    double sum = 0;
    int present = 0;
    for (int l = 0; l < 8; ++l)
        if (total[static_cast<size_t>(l)] > 0) {
            sum += static_cast<double>(hit[static_cast<size_t>(l)]) / total[static_cast<size_t>(l)];
            ++present;
        }
    return sum / present;
}

double acc_within(const PredictionSet& ps, double delta) {
    require_nonempty(ps);
    if (delta < 0) throw MetricError("acc_within: delta must be non-negative");
    size_t hit = 0;
    for (size_t i = 0; i < ps.size(); ++i)
        if (std::fabs(level_value(ps.preds()[i]) - level_value(ps.golds()[i])) <= delta + kAdjSlack)
            ++hit;
    return static_cast<double>(hit) / ps.size();
}

std::array<std::array<int, 8>, 8> confusion_matrix(const PredictionSet& ps) {
    std::array<std::array<int, 8>, 8> m{};
    for (size_t i = 0; i < ps.size(); ++i)
        ++m[static_cast<size_t>(ps.golds()[i])][static_cast<size_t>(ps.preds()[i])];
    return m;
}

MetricsReport compute_report(const PredictionSet& ps) {
    require_nonempty(ps);
    MetricsReport r;
    r.aspect = ps.aspect();
    r.n = ps.size();
    try {
        r.pcc = pcc(ps.pred_values(), ps.gold_values());
    } catch (const MetricError&) {
        r.pcc = 0;
        r.pcc_defined = false;
    }
    r.rmse = rmse(ps.pred_values(), ps.gold_values());
    r.abs_acc = abs_accuracy(ps);
    r.adj_acc = adj_accuracy(ps);
    r.macro_acc = macro_accuracy(ps);
    r.acc_within_05 = acc_within(ps, 0.5);
    r.acc_within_10 = acc_within(ps, 1.0);
    r.confusion = confusion_matrix(ps);
    return r;
}

}  // namespace sfmt
