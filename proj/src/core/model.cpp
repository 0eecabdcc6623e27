#include "ocuflow/core/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ocuflow/core/error.hpp"
#include "ocuflow/core/text.hpp"

namespace ocuflow {

ModalityCatalog::ModalityCatalog() {
  extend("CFP", {"color fundus photography", "colour fundus photography", "fundus"});
  extend("OCT", {"optical coherence tomography"});
  extend("FFA", {"fundus fluorescein angiography", "fluorescein angiography", "FA"});
  extend("ICGA", {"indocyanine green angiography"});
  extend("SLO", {"scanning laser ophthalmoscopy"});
  extend("UWF-SLO", {"UWF", "ultra-widefield", "ultra-wide field imaging"});
  extend("FAF", {"fundus autofluorescence"});
  extend("MRI", {"magnetic resonance imaging"});
  extend("slit-lamp", {"slit lamp", "anterior segment photography"});
}

const ModalityCatalog& ModalityCatalog::standard() {
  static const ModalityCatalog catalog;
  return catalog;
}

void ModalityCatalog::extend(std::string code, std::vector<std::string> aliases) {
  if (code.empty()) throw Error(ErrorCode::InvalidArgument, "empty modality code");
  if (codes_.size() >= kMaxModalities) {
    throw Error(ErrorCode::InvalidArgument, "modality catalog is full at " +
                                                std::to_string(kMaxModalities) + " codes");
  }
  auto key = text::to_lower(code);
  if (lookup_.contains(key)) throw Error(ErrorCode::InvalidArgument, "duplicate modality " + code);
  lookup_.emplace(key, code);
  for (const auto& alias : aliases) lookup_.emplace(text::to_lower(alias), code);
  codes_.push_back(std::move(code));
}

Modality ModalityCatalog::parse(std::string_view text) const {
  auto it = lookup_.find(text::normalize(text));
  if (it == lookup_.end()) return Modality::unknown();
  return Modality(it->second);
}

bool ModalityCatalog::contains(std::string_view code) const {
  return std::find(codes_.begin(), codes_.end(), code) != codes_.end();
}

std::string_view to_string(Laterality l) noexcept {
  switch (l) {
    case Laterality::OD: return "OD";
    case Laterality::OS: return "OS";
    case Laterality::Unknown: return "Unknown";
  }
  return "Unknown";
}

Laterality parse_laterality(std::string_view s) noexcept {
  auto t = text::normalize(s);
  if (t == "od" || t == "right" || t == "right eye") return Laterality::OD;
  if (t == "os" || t == "left" || t == "left eye") return Laterality::OS;
  return Laterality::Unknown;
}

const ImageRef* ClinicalCase::find_image(std::string_view image_id) const {
  for (const auto& img : images) {
    if (img.image_id == image_id) return &img;
  }
  return nullptr;
}

ClassificationOutput::ClassificationOutput(std::vector<RankedPrediction> predictions,
                                           double threshold_used)
    : predictions_(std::move(predictions)), threshold_used_(threshold_used) {
  if (predictions_.empty()) throw Error(ErrorCode::EmptyInput, "predictions");
  if (!(threshold_used_ >= 0.0 && threshold_used_ <= 1.0)) {
    throw Error(ErrorCode::InvalidProbability, "threshold_used");
  }
  for (std::size_t i = 0; i < predictions_.size(); ++i) {
    const auto& p = predictions_[i];
    if (!(p.probability >= 0.0 && p.probability <= 1.0)) {
      throw Error(ErrorCode::InvalidProbability, p.label);
    }
    if (i > 0 && p.probability > predictions_[i - 1].probability) {
      throw Error(ErrorCode::InvalidArgument, "predictions not ordered at " + p.label);
    }
    if (i > 0 && p.probability < threshold_used_) {
      throw Error(ErrorCode::InvalidArgument, "alternative below threshold: " + p.label);
    }
  }
}

ClassificationOutput rank_predictions(const std::map<std::string, double>& raw, double threshold) {
  if (raw.empty()) throw Error(ErrorCode::EmptyInput, "raw predictions");
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidProbability, "threshold");
  }
  std::vector<RankedPrediction> all;
  all.reserve(raw.size());
  for (const auto& [label, p] : raw) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidProbability, label);
    all.push_back({label, p});
  }
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.label < b.label;
  });
  std::vector<RankedPrediction> kept{all.front()};
  for (std::size_t i = 1; i < all.size(); ++i) {
    if (all[i].probability >= threshold) kept.push_back(all[i]);
  }
  return ClassificationOutput(std::move(kept), threshold);
}

LesionInstanceSet lesion_stats(std::string lesion_type, std::vector<double> areas) {
  for (double a : areas) {
    if (!(a >= 0.0)) throw Error(ErrorCode::NegativeArea, lesion_type);
  }
  std::sort(areas.begin(), areas.end());
  LesionInstanceSet set;
  set.lesion_type = std::move(lesion_type);
  set.count = areas.size();
  if (!areas.empty()) {
    set.area_min = areas.front();
    set.area_max = areas.back();
    set.area_mean = std::accumulate(areas.begin(), areas.end(), 0.0) /
                    static_cast<double>(areas.size());
  }
  set.areas = std::move(areas);
  return set;
}

VesselMetrics VesselMetrics::from_calibers(double crae, double crve, double vessel_area_density,
                                           double fractal_dimension_artery,
                                           std::optional<double> tortuosity) {
  if (!(crve > 0.0)) throw Error(ErrorCode::ZeroVenularCaliber, "crve");
  return VesselMetrics(crae, crve, crae / crve, vessel_area_density, fractal_dimension_artery,
                       tortuosity);
}

VesselMetrics::VesselMetrics(double crae, double crve, double avr, double vessel_area_density,
                             double fractal_dimension_artery, std::optional<double> tortuosity)
    : crae_(crae),
      crve_(crve),
      avr_(avr),
      vessel_area_density_(vessel_area_density),
      fractal_dimension_artery_(fractal_dimension_artery),
      tortuosity_(tortuosity) {
  if (!(crve_ > 0.0)) throw Error(ErrorCode::ZeroVenularCaliber, "crve");
  if (!(crae_ >= 0.0)) throw Error(ErrorCode::InvalidArgument, "crae must be non-negative");
  if (!(std::fabs(avr_ - crae_ / crve_) <= kAvrTolerance)) {
    throw Error(ErrorCode::InvalidArgument, "avr inconsistent with crae/crve");
  }
  if (!(vessel_area_density_ >= 0.0 && vessel_area_density_ <= 100.0)) {
    throw Error(ErrorCode::InvalidArgument, "vessel_area_density out of [0,100]");
  }
}

double VesselMetrics::avr_reported() const noexcept { return std::round(avr_ * 1000.0) / 1000.0; }

std::string_view to_string(ArtifactKind k) noexcept {
  switch (k) {
    case ArtifactKind::Image2D: return "image-2d";
    case ArtifactKind::Video: return "video";
    case ArtifactKind::Model3D: return "model-3d";
    case ArtifactKind::Text: return "text";
  }
  return "image-2d";
}

std::optional<ArtifactKind> parse_artifact_kind(std::string_view s) noexcept {
  if (s == "image-2d") return ArtifactKind::Image2D;
  if (s == "video") return ArtifactKind::Video;
  if (s == "model-3d") return ArtifactKind::Model3D;
  if (s == "text") return ArtifactKind::Text;
  return std::nullopt;
}

}  // namespace ocuflow
