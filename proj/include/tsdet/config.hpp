#ifndef TSDET_CONFIG_HPP
#define TSDET_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tsdet/boosting.hpp"
#include "tsdet/dataset.hpp"
#include "tsdet/eval.hpp"
#include "tsdet/features.hpp"
#include "tsdet/subcat.hpp"

namespace tsd {

struct ClassConfig {
    std::string name;
    int K = 1;
    SubcatSpace space = SubcatSpace::Geometric;
    WindowPolicy window;
    int min_cluster = 20;
    JitterParams jitter;
    double nu = 0.1;
    int depth = 2;
    std::vector<int> schedule = {64, 256, 1024, 2048};
    FeatureCombo features = FeatureCombo::Acf;
    int neg_seed_count = 5000;
    int hard_neg_cap = 10000;
    double nms_threshold = 0.5;
    double eval_overlap = 0.5;
    MatchProtocol protocol = MatchProtocol::Gtsdb;
    int max_difficulty = 2;
    bool uiuc_tolerance = false;
};

struct PathsConfig {
    std::string format = "csv";  // csv | kitti
    std::string image_dir;
    std::string label_dir;    // kitti
    std::string annotations;  // csv
    std::string class_map;    // csv sidecar
    bool csv_header = false;
    std::string model_dir;
    std::string output_dir;
};

struct PipelineConfig {
    uint64_t seed = 1;
    PathsConfig paths;
    DifficultyRule difficulty;
    std::vector<ClassConfig> classes;
};

// JSON config document; unknown keys anywhere are rejected, as are values
// outside their contracts (nu in (0,1], K >= 1, depth 1..5, thresholds in
// (0,1], ascending positive schedules). TSDET_* environment variables
// override the path entries only.
PipelineConfig parse_config_text(const std::string& text, const std::string& origin = "config");
PipelineConfig load_config(const std::string& path);

const ClassConfig& class_config(const PipelineConfig& config, const std::string& name);

}  // namespace tsd

#endif
