#include "modeconv/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace modeconv::anomaly {

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw DomainError("quantile of an empty list");
    if (!(q > 0.0 && q < 1.0)) throw DomainError("quantile q must be in (0,1)");
    std::sort(values.begin(), values.end());
    const double h = double(values.size() - 1) * q;
    const auto lo = std::size_t(std::floor(h));
    const double frac = h - double(lo);
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

ThresholdModel fit_l1(const std::vector<double>& train_errors, double q) {
    if (train_errors.empty()) throw DomainError("fit_l1 requires a non-empty error list");
    ThresholdModel model;
    model.kind = ThresholdKind::L1;
    model.percentile = q;
    model.threshold = quantile(train_errors, q);
    return model;
}

ThresholdModel fit_mahalanobis(const std::vector<Eigen::VectorXd>& train_residuals,
                               double q) {
    if (train_residuals.size() < 2)
        throw DomainError("fit_mahalanobis requires at least 2 residual vectors");
    const Eigen::Index dim = train_residuals.front().size();
    for (const auto& r : train_residuals)
        if (r.size() != dim) throw DomainError("residual vectors must share a dimension");

    ThresholdModel model;
    model.kind = ThresholdKind::Mahalanobis;
    model.percentile = q;
    model.mean = Eigen::VectorXd::Zero(dim);
    for (const auto& r : train_residuals) model.mean += r;
    model.mean /= double(train_residuals.size());

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& r : train_residuals) {
        const Eigen::VectorXd d = r - model.mean;
        cov += d * d.transpose();
    }
    cov /= double(train_residuals.size());
    const double lambda = 1e-6 * cov.trace() / double(dim);
    cov.diagonal().array() += lambda > 0.0 ? lambda : 1e-12;
    model.covariance = cov;

    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw NumericError("residual covariance is not positive definite after regularization");
    model.covariance_llt = llt.matrixL();

    std::vector<double> distances;
    distances.reserve(train_residuals.size());
    for (const auto& r : train_residuals) distances.push_back(model.score(r));
    model.threshold = quantile(distances, q);
    return model;
}

double ThresholdModel::score(const Eigen::VectorXd& residual) const {
    if (kind == ThresholdKind::L1) return residual.cwiseAbs().sum();
    const Eigen::VectorXd d = residual - mean;
    // Solve L y = d; distance = ||y||
    const Eigen::VectorXd y =
        covariance_llt.triangularView<Eigen::Lower>().solve(d);
    return y.norm();
}

std::vector<int> classify(const std::vector<double>& scores, const ThresholdModel& model) {
    std::vector<int> flags(scores.size(), 0);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw DomainError("scores must be finite");
        flags[i] = scores[i] > model.threshold ? 1 : 0;
    }
    return flags;
}

namespace {

/// ROC AUC by trapezoidal integration, ties handled by grouping.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& truth) {
    std::size_t pos = 0, neg = 0;
    for (int t : truth) (t ? pos : neg) += 1;
    if (pos == 0 || neg == 0) return 0.5;

    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t(0));
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double auc = 0.0;
    double tp = 0.0, fp = 0.0, prev_tp = 0.0, prev_fp = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        const double s = scores[idx[i]];
        while (i < idx.size() && scores[idx[i]] == s) {
            if (truth[idx[i]]) tp += 1.0; else fp += 1.0;
            ++i;
        }
        auc += (fp - prev_fp) * (tp + prev_tp) / 2.0;
        prev_tp = tp;
        prev_fp = fp;
    }
    return auc / (double(pos) * double(neg));
}

}  // namespace

AnomalyReport metrics(const std::vector<int>& flags, const std::vector<int>& truth,
                      const std::vector<double>& scores) {
    if (flags.size() != truth.size() || scores.size() != truth.size())
        throw DomainError("flags, truth and scores must have equal lengths");

    AnomalyReport rep;
    rep.flags = flags;
    rep.scores = scores;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (flags[i] && truth[i]) ++rep.tp;
        else if (flags[i] && !truth[i]) ++rep.fp;
        else if (!flags[i] && !truth[i]) ++rep.tn;
        else ++rep.fn;
    }
    const double tp = double(rep.tp), fp = double(rep.fp), tn = double(rep.tn), fn = double(rep.fn);
    rep.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
    rep.recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
    rep.f1 = rep.precision + rep.recall > 0.0
                 ? 2.0 * rep.precision * rep.recall / (rep.precision + rep.recall)
                 : 0.0;
    const double tnr = tn + fp > 0.0 ? tn / (tn + fp) : 0.0;
    rep.balanced_accuracy = 0.5 * (rep.recall + tnr);

    std::size_t pos = 0, neg = 0;
    for (int t : truth) (t ? pos : neg) += 1;
    rep.degenerate_truth = pos == 0 || neg == 0;
    rep.auc = roc_auc(scores, truth);
    return rep;
}

std::string AnomalyReport::to_json() const {
    nlohmann::ordered_json j;
    j["tp"] = tp;
    j["fp"] = fp;
    j["tn"] = tn;
    j["fn"] = fn;
    j["precision"] = precision;
    j["recall"] = recall;
    j["f1"] = f1;
    j["balanced_accuracy"] = balanced_accuracy;
    j["auc"] = auc;
    j["degenerate_truth"] = degenerate_truth;
    j["threshold"] = threshold;
    j["scores"] = scores;
    j["flags"] = flags;
    return j.dump(2);
}

std::string AnomalyReport::csv_header() {
    return "tp,fp,tn,fn,precision,recall,f1,balanced_accuracy,auc,threshold";
}

std::string AnomalyReport::to_csv_row() const {
    std::ostringstream out;
    out.precision(17);
    out << tp << ',' << fp << ',' << tn << ',' << fn << ',' << precision << ','
        << recall << ',' << f1 << ',' << balanced_accuracy << ',' << auc << ','
        << threshold;
    return out.str();
}

}  // namespace modeconv::anomaly
