#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "imil/model.hpp"

namespace imil {

double accuracy(std::span<const PredictionRecord> records);

/// Mann-Whitney AUROC: share of (positive, negative) pairs ranked correctly,
/// ties counting one half. Throws UndefinedMetricError unless both classes occur.
double auroc(std::span<const double> scores, std::span<const int> labels);

struct CalibrationBin {
  int index = 0;  ///< 1-based, as in the usual ECE notation
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double accuracy = 0.0;
  double confidence = 0.0;
};

struct EceResult {
  double ece = 0.0;
  std::vector<CalibrationBin> bins;
};

/// Equal-width bins over [0,1]; bin b holds (lower, upper], the first bin also holds 0.
int calibration_bin(double confidence, int num_bins);

EceResult ece(std::span<const double> confidences, const std::vector<bool>& correct,
              int num_bins = 15);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  ///< predict positive when score >= threshold; +inf for (0,0)
};

/// One point per distinct score plus the (0,0) start, ordered by increasing fpr.
std::vector<RocPoint> roc_points(std::span<const double> scores, std::span<const int> labels);

double trapezoid_area(std::span<const RocPoint> points);

struct EvalReport {
  std::size_t count = 0;
  double accuracy = 0.0;
  double auroc = 0.0;
  double ece = 0.0;
  std::vector<CalibrationBin> bins;
  std::vector<RocPoint> roc;
};

/// Accuracy, AUROC on P(class 1), and ECE on max-probability confidence.
EvalReport evaluate(std::span<const PredictionRecord> records, int num_bins = 15);

nlohmann::ordered_json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

/// report.json, reliability.csv and roc.csv inside `dir`.
void write_report(const EvalReport& report, const std::filesystem::path& dir);
EvalReport read_report(const std::filesystem::path& report_json);

}  // namespace imil
