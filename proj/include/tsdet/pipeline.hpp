#ifndef TSDET_PIPELINE_HPP
#define TSDET_PIPELINE_HPP

#include <map>
#include <string>
#include <vector>

#include "tsdet/config.hpp"
#include "tsdet/detect.hpp"
#include "tsdet/io.hpp"

namespace tsd {

class ImageCache {
  public:
    const Image8& get(const std::string& path);

  private:
    std::map<std::string, Image8> cache_;
};

// Feature rows for fixed-size crops, channel-major to match the scan
// window layout. Every crop must measure layout cell dims x 4.
FeatureMatrix features_for_crops(const std::vector<Image8>& crops, FeatureCombo combo,
                                 const FeatureLayout& layout, int threads);

FeatureLayout layout_for_window(int padded_w, int padded_h, FeatureCombo combo);

// The training corpus a class trains against: its positives, every
// annotation for negative exclusion, and the images negatives come from.
struct TrainingCorpus {
    std::vector<AnnotatedSample> positives;  // one class
    std::map<std::string, std::vector<BoundingBox>> exclusion;  // image -> all-class boxes
    std::vector<std::string> negative_images;
};

TrainingCorpus build_corpus(const std::vector<AnnotatedSample>& annotations,
                            const std::string& class_name);

SubcategoryLayout cluster_class(const ClassConfig& cc,
                                const std::vector<AnnotatedSample>& class_samples,
                                ImageCache& images, uint64_t seed);

struct TrainedSubcat {
    BoostedModel model;
    TrainingReport report;
};

struct TrainedClass {
    std::string name;
    SubcategoryLayout layout;
    std::vector<TrainedSubcat> subcats;
};

// Full per-class training: jittered positives per subcategory, seeded and
// bootstrap-harvested negatives, soft-cascade thresholds, Platt calibration
// on training positives plus the harvested hard negatives.
TrainedClass train_class(const ClassConfig& cc, const TrainingCorpus& corpus,
                         const SubcategoryLayout& layout, ImageCache& images, int threads,
                         uint64_t seed);

DetectorBank assemble_bank(const PipelineConfig& config,
                           const std::vector<TrainedClass>& classes);

// Models from `<model_dir>/<class>_<subcat>.model` for every configured class.
DetectorBank load_bank(const PipelineConfig& config);

// The shared stack every bank member can scan: the widest family any model
// declares (sub-combinations locate their channels by name).
FeatureCombo bank_combo(const DetectorBank& bank);
ChannelBuilder combo_builder(FeatureCombo combo);

std::vector<AnnotatedSample> load_annotations(const PipelineConfig& config);

}  // namespace tsd

#endif
