#include "imil/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "imil/errors.hpp"

namespace imil {
namespace {

void check_binary(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ValidationError("scores and labels differ in length");
  std::size_t positives = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ValidationError("labels must be 0 or 1");
    positives += static_cast<std::size_t>(y);
  }
  if (positives == 0 || positives == labels.size()) {
    throw UndefinedMetricError("AUROC/ROC need both classes present");
  }
}

}  // namespace

double accuracy(std::span<const PredictionRecord> records) {
  if (records.empty()) throw ValidationError("accuracy of an empty prediction set");
  const auto hits = std::count_if(records.begin(), records.end(),
                                  [](const PredictionRecord& r) { return r.correct(); });
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_binary(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // Midranks (1-based) summed over positives; all values are multiples of 0.5.
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        positive_rank_sum += midrank;
        ++positives;
      }
    }
    i = j;
  }
  const double n_pos = static_cast<double>(positives);
  const double n_neg = static_cast<double>(n - positives);
  const double u = positive_rank_sum - n_pos * (n_pos + 1.0) / 2.0;
  return u / (n_pos * n_neg);
}

int calibration_bin(double confidence, int num_bins) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw ValidationError("confidence " + std::to_string(confidence) + " outside [0,1]");
  }
  int b = static_cast<int>(std::ceil(confidence * num_bins)) - 1;
  b = std::clamp(b, 0, num_bins - 1);
  // Reconcile with the edges b/num_bins used to report bins.
  while (b > 0 && confidence <= static_cast<double>(b) / num_bins) --b;
  while (b < num_bins - 1 && confidence > static_cast<double>(b + 1) / num_bins) ++b;
  return b;
}

EceResult ece(std::span<const double> confidences, const std::vector<bool>& correct,
              int num_bins) {
  if (num_bins < 1) throw ValidationError("num_bins must be >= 1");
  if (confidences.size() != correct.size()) {
    throw ValidationError("confidences and correctness flags differ in length");
  }
  if (confidences.empty()) throw ValidationError("ECE of an empty prediction set");

  std::vector<std::size_t> count(num_bins, 0);
  std::vector<std::size_t> hits(num_bins, 0);
  std::vector<double> conf_sum(num_bins, 0.0);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const int b = calibration_bin(confidences[i], num_bins);
    ++count[b];
    hits[b] += correct[i] ? 1 : 0;
    conf_sum[b] += confidences[i];
  }

  EceResult out;
  const double n = static_cast<double>(confidences.size());
  for (int b = 0; b < num_bins; ++b) {
    CalibrationBin bin;
    bin.index = b + 1;
    bin.lower = static_cast<double>(b) / num_bins;
    bin.upper = static_cast<double>(b + 1) / num_bins;
    bin.count = count[b];
    if (count[b] > 0) {
      bin.accuracy = static_cast<double>(hits[b]) / static_cast<double>(count[b]);
      bin.confidence = conf_sum[b] / static_cast<double>(count[b]);
      out.ece += static_cast<double>(count[b]) / n * std::abs(bin.accuracy - bin.confidence);
    }
    out.bins.push_back(bin);
  }
  return out;
}

std::vector<RocPoint> roc_points(std::span<const double> scores, std::span<const int> labels) {
  check_binary(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  const auto positives = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const auto negatives = static_cast<double>(labels.size()) - positives;

  std::vector<RocPoint> points{{0.0, 0.0, std::numeric_limits<double>::infinity()}};
  double tp = 0.0;
  double fp = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      (labels[order[i]] == 1 ? tp : fp) += 1.0;
      ++i;
    }
    points.push_back({fp / negatives, tp / positives, threshold});
  }
  return points;
}

double trapezoid_area(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  }
  return area;
}

EvalReport evaluate(std::span<const PredictionRecord> records, int num_bins) {
  EvalReport report;
  report.count = records.size();
  report.accuracy = accuracy(records);
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<double> confidences;
  std::vector<bool> correct;
  for (const auto& r : records) {
    scores.push_back(r.probabilities[1]);
    labels.push_back(r.true_label);
    confidences.push_back(r.confidence);
    correct.push_back(r.correct());
  }
  report.auroc = auroc(scores, labels);
  report.roc = roc_points(scores, labels);
  auto calibration = ece(confidences, correct, num_bins);
  report.ece = calibration.ece;
  report.bins = std::move(calibration.bins);
  return report;
}

nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["count"] = report.count;
  j["accuracy"] = report.accuracy;
  j["auroc"] = report.auroc;
  j["ece"] = report.ece;
  j["num_bins"] = report.bins.size();
  auto& bins = j["bins"] = nlohmann::ordered_json::array();
  for (const auto& b : report.bins) {
    bins.push_back({{"index", b.index},
                    {"lower", b.lower},
                    {"upper", b.upper},
                    {"count", b.count},
                    {"accuracy", b.accuracy},
                    {"confidence", b.confidence}});
  }
  auto& roc = j["roc_points"] = nlohmann::ordered_json::array();
  for (const auto& p : report.roc) {
    nlohmann::ordered_json point{{"fpr", p.fpr}, {"tpr", p.tpr}};
    point["threshold"] = std::isinf(p.threshold) ? nlohmann::ordered_json(nullptr)
                                                 : nlohmann::ordered_json(p.threshold);
    roc.push_back(std::move(point));
  }
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.count = j.value("count", std::size_t{0});
  r.accuracy = j.at("accuracy").get<double>();
  r.auroc = j.at("auroc").get<double>();
  r.ece = j.at("ece").get<double>();
  for (const auto& b : j.value("bins", nlohmann::json::array())) {
    r.bins.push_back({b.at("index").get<int>(), b.at("lower").get<double>(),
                      b.at("upper").get<double>(), b.at("count").get<std::size_t>(),
                      b.at("accuracy").get<double>(), b.at("confidence").get<double>()});
  }
  for (const auto& p : j.value("roc_points", nlohmann::json::array())) {
    const auto& t = p.at("threshold");
    r.roc.push_back({p.at("fpr").get<double>(), p.at("tpr").get<double>(),
                     t.is_null() ? std::numeric_limits<double>::infinity() : t.get<double>()});
  }
  return r;
}

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "report.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "report.json").string());
    out << to_json(report).dump(2) << '\n';
  }
  char line[160];
  {
    std::ofstream out(dir / "reliability.csv", std::ios::trunc);
    out << "bin,lower,upper,count,accuracy,confidence\n";
    for (const auto& b : report.bins) {
      std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%zu,%.17g,%.17g\n", b.index, b.lower,
                    b.upper, b.count, b.accuracy, b.confidence);
      out << line;
    }
  }
  {
    std::ofstream out(dir / "roc.csv", std::ios::trunc);
    out << "fpr,tpr,threshold\n";
    for (const auto& p : report.roc) {
      if (std::isinf(p.threshold)) {
        std::snprintf(line, sizeof(line), "%.17g,%.17g,inf\n", p.fpr, p.tpr);
      } else {
        std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g\n", p.fpr, p.tpr, p.threshold);
      }
      out << line;
    }
  }
}

EvalReport read_report(const std::filesystem::path& report_json) {
  std::ifstream in(report_json);
  if (!in) throw IoError("cannot open " + report_json.string());
  try {
    return report_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(report_json.string() + ": " + e.what());
  }
}

}  // namespace imil
