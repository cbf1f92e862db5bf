#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "modeconv/errors.hpp"

namespace modeconv::anomaly {

enum class ThresholdKind { L1, Mahalanobis };

struct ThresholdModel {
    ThresholdKind kind = ThresholdKind::L1;
    double threshold = 0.0;
    double percentile = 0.95;
    // Mahalanobis only:
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;       // regularized
    Eigen::MatrixXd covariance_llt;   // lower Cholesky factor

    double score(const Eigen::VectorXd& residual) const;
};

struct AnomalyReport {
    std::vector<double> scores;
    std::vector<int> flags;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double balanced_accuracy = 0.0;
    double auc = 0.5;
    bool degenerate_truth = false;   // AUC reported as 0.5, single-class truth
    double threshold = 0.0;

    std::string to_json() const;
    std::string to_csv_row() const;
    static std::string csv_header();
};

/// Empirical q-quantile with linear interpolation between order
/// statistics (type-7).
double quantile(std::vector<double> values, double q);

/// Threshold at the q-quantile of per-window L1 errors.
ThresholdModel fit_l1(const std::vector<double>& train_errors, double q = 0.95);

/// Mean/covariance fit on residual vectors, covariance regularized by
/// +lambda I with lambda = 1e-6 trace / dim; threshold at the
/// q-quantile of training Mahalanobis distances.
ThresholdModel fit_mahalanobis(const std::vector<Eigen::VectorXd>& train_residuals,
                               double q = 0.95);

/// Strict inequality: flag = score > threshold.
std::vector<int> classify(const std::vector<double>& scores, const ThresholdModel& model);

/// Confusion counts, precision/recall/F1/balanced accuracy, and ROC AUC
/// by trapezoidal integration over all score thresholds.
AnomalyReport metrics(const std::vector<int>& flags, const std::vector<int>& truth,
                      const std::vector<double>& scores);

}  // namespace modeconv::anomaly
