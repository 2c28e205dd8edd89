#pragma once

#include <array>
#include <string>
#include <vector>

#include "sfmt/error.hpp"
#include "sfmt/levels.hpp"

namespace sfmt {

// Scored predictions for one aspect. Ids are unique so a set can be merged
// or diffed against another run without ambiguity.
class PredictionSet {
public:
    explicit PredictionSet(char aspect = 'H') : aspect_(aspect) {}

    void add(const std::string& id, int pred, int gold) {
        check_level(pred);
        check_level(gold);
        for (const auto& existing : ids_)
            if (existing == id) throw StateError("duplicate prediction id: " + id);
        ids_.push_back(id);
        pred_.push_back(pred);
        gold_.push_back(gold);
    }

    char aspect() const { return aspect_; }
    size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<int>& preds() const { return pred_; }
    const std::vector<int>& golds() const { return gold_; }

    std::vector<double> pred_values() const { return values(pred_); }
    std::vector<double> gold_values() const { return values(gold_); }

private:
    static std::vector<double> values(const std::vector<int>& lv) {
        std::vector<double> out;
        out.reserve(lv.size());
        for (int l : lv) out.push_back(level_value(l));
        return out;
    }

    char aspect_;
    std::vector<std::string> ids_;
    std::vector<int> pred_;
    std::vector<int> gold_;
};

struct MetricsReport {
    char aspect = 'H';
    size_t n = 0;
    double pcc = 0;
    double rmse = 0;
    double abs_acc = 0;
    double adj_acc = 0;
    double macro_acc = 0;
    double acc_within_05 = 0;
    double acc_within_10 = 0;
    bool pcc_defined = true;  // false when either vector is constant
    std::array<std::array<int, 8>, 8> confusion{};  // rows gold, cols pred
};

// Sample Pearson correlation. A constant vector makes the value undefined;
// that is reported as an error rather than a silent zero so degenerate
// model outputs cannot masquerade as "no correlation".
double pcc(const std::vector<double>& a, const std::vector<double>& b);

double rmse(const std::vector<double>& pred, const std::vector<double>& gold);

double abs_accuracy(const PredictionSet& ps);

// Same or neighboring level under the 0.5-spaced embedding.
double adj_accuracy(const PredictionSet& ps);

// Mean per-gold-level exact-match recall over the levels present.
double macro_accuracy(const PredictionSet& ps);

double acc_within(const PredictionSet& ps, double delta);

std::array<std::array<int, 8>, 8> confusion_matrix(const PredictionSet& ps);

// All metrics in one pass; pcc is marked undefined instead of throwing when
// a vector is constant, so reports on degenerate sets still render.
MetricsReport compute_report(const PredictionSet& ps);

}  // namespace sfmt
