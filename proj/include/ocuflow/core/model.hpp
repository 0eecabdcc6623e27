#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ocuflow {

// An imaging modality code. Codes come from a ModalityCatalog; anything the
// catalog does not know parses to Modality::unknown() rather than being dropped.
class Modality {
 public:
  static Modality unknown() { return Modality{}; }

  const std::string& code() const noexcept { return code_; }
  bool is_unknown() const noexcept { return code_.empty(); }
  std::string display() const { return is_unknown() ? "Unknown" : code_; }

  friend bool operator==(const Modality&, const Modality&) = default;
  friend auto operator<=>(const Modality&, const Modality&) = default;

 private:
  friend class ModalityCatalog;
  explicit Modality(std::string code) : code_(std::move(code)) {}
  Modality() = default;

  std::string code_;
};

class ModalityCatalog {
 public:
  static constexpr std::size_t kMaxModalities = 23;

  // Seeded with CFP, OCT, FFA, ICGA, SLO, UWF-SLO, FAF, MRI, slit-lamp.
  ModalityCatalog();

  static const ModalityCatalog& standard();

  // Adds a code (and optional aliases). Throws InvalidArgument on duplicates
  // or when the catalog would exceed kMaxModalities.
  void extend(std::string code, std::vector<std::string> aliases = {});

  // Case-insensitive lookup over codes and aliases.
  Modality parse(std::string_view text) const;

  bool contains(std::string_view code) const;
  std::size_t size() const noexcept { return codes_.size(); }
  const std::vector<std::string>& codes() const noexcept { return codes_; }

 private:
  std::vector<std::string> codes_;
  std::map<std::string, std::string> lookup_;  // lowercase spelling -> code
};

enum class Laterality { OD, OS, Unknown };

std::string_view to_string(Laterality l) noexcept;
Laterality parse_laterality(std::string_view text) noexcept;

struct ImageRef {
  std::string image_id;
  std::string uri;
  std::optional<Modality> modality_hint;
  std::optional<Laterality> laterality_hint;
};

struct GroundTruth {
  std::string diagnosis;
  std::vector<std::string> expected_tools;
  std::optional<std::string> modality;
};

struct ClinicalCase {
  std::string case_id;
  std::vector<ImageRef> images;
  std::string query;
  std::optional<GroundTruth> ground_truth;

  const ImageRef* find_image(std::string_view image_id) const;
};

struct RankedPrediction {
  std::string label;
  double probability = 0.0;

  friend bool operator==(const RankedPrediction&, const RankedPrediction&) = default;
};

inline constexpr double kDefaultClassificationThreshold = 0.3;

// Ranked classifier output. Construction enforces: non-empty, non-increasing
// by probability, every entry after the first at or above threshold_used.
class ClassificationOutput {
 public:
  ClassificationOutput(std::vector<RankedPrediction> predictions, double threshold_used);

  const std::vector<RankedPrediction>& predictions() const noexcept { return predictions_; }
  const RankedPrediction& top() const noexcept { return predictions_.front(); }
  double threshold_used() const noexcept { return threshold_used_; }

  friend bool operator==(const ClassificationOutput&, const ClassificationOutput&) = default;

 private:
  std::vector<RankedPrediction> predictions_;
  double threshold_used_;
};

// Top-1 is always kept; the rest survive iff probability >= threshold.
// Ties are broken lexicographically by label.
ClassificationOutput rank_predictions(const std::map<std::string, double>& raw,
                                      double threshold = kDefaultClassificationThreshold);

struct LesionInstanceSet {
  std::string lesion_type;
  std::size_t count = 0;
  std::vector<double> areas;  // pixel^2, ascending
  std::optional<double> area_min;
  std::optional<double> area_max;
  std::optional<double> area_mean;

  friend bool operator==(const LesionInstanceSet&, const LesionInstanceSet&) = default;
};

LesionInstanceSet lesion_stats(std::string lesion_type, std::vector<double> areas);

class VesselMetrics {
 public:
  static constexpr double kAvrTolerance = 1e-3;

  // Derives avr = crae / crve. Throws ZeroVenularCaliber when crve <= 0.
  static VesselMetrics from_calibers(double crae, double crve, double vessel_area_density,
                                     double fractal_dimension_artery,
                                     std::optional<double> tortuosity = std::nullopt);

  // Checks a tool-reported avr against the calibers.
  VesselMetrics(double crae, double crve, double avr, double vessel_area_density,
                double fractal_dimension_artery, std::optional<double> tortuosity);

  double crae() const noexcept { return crae_; }
  double crve() const noexcept { return crve_; }
  double avr() const noexcept { return avr_; }
  // avr rounded to three decimals, as shown in reports.
  double avr_reported() const noexcept;
  double vessel_area_density() const noexcept { return vessel_area_density_; }
  double fractal_dimension_artery() const noexcept { return fractal_dimension_artery_; }
  std::optional<double> tortuosity() const noexcept { return tortuosity_; }

 private:
  double crae_;
  double crve_;
  double avr_;
  double vessel_area_density_;
  double fractal_dimension_artery_;
  std::optional<double> tortuosity_;
};

struct RegressionOutput {
  std::string quantity;
  double value = 0.0;
  std::optional<double> scale_max;  // set for ordinal outputs (1..scale_max)
  std::string unit;
  std::string label;

  bool is_ordinal() const noexcept { return scale_max.has_value(); }
};

enum class ArtifactKind { Image2D, Video, Model3D, Text };

std::string_view to_string(ArtifactKind k) noexcept;
std::optional<ArtifactKind> parse_artifact_kind(std::string_view text) noexcept;

struct GenerationOutput {
  ArtifactKind artifact_kind = ArtifactKind::Image2D;
  std::string artifact_ref;
  std::string artifact_id;  // image id assigned to the artifact for re-analysis
  std::vector<std::string> derived_from;
};

struct Citation {
  std::string source_id;
  std::string passage_id;

  friend bool operator==(const Citation&, const Citation&) = default;
};

struct EvidenceItem {
  std::string step_id;
  std::string text;
  std::vector<Citation> citations;

  friend bool operator==(const EvidenceItem&, const EvidenceItem&) = default;
};

struct StructuredReport {
  std::string modality;
  std::string image_quality;
  std::string laterality;
  std::string diagnosis;
  std::vector<EvidenceItem> evidence;
  std::string recommendations;
  std::vector<std::string> flags;

  friend bool operator==(const StructuredReport&, const StructuredReport&) = default;
};

}  // namespace ocuflow
