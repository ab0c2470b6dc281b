#include "tsdet/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

#include "tsdet/calibrate.hpp"
#include "tsdet/errors.hpp"
#include "tsdet/parallel.hpp"
#include "tsdet/rng.hpp"

namespace fs = std::filesystem;

namespace tsd {

const Image8& ImageCache::get(const std::string& path) {
    auto it = cache_.find(path);
    if (it == cache_.end()) it = cache_.emplace(path, read_image(path)).first;
    return it->second;
}

FeatureLayout layout_for_window(int padded_w, int padded_h, FeatureCombo combo) {
    if (padded_w % kAcfShrink != 0 || padded_h % kAcfShrink != 0)
        throw InvalidInput("layout_for_window: padded dims must be multiples of 4");
    FeatureLayout layout;
    layout.cell_w = padded_w / kAcfShrink;
    layout.cell_h = padded_h / kAcfShrink;
    layout.channels = combo_channels(combo);
    layout.family = combo_name(combo);
    return layout;
}

FeatureMatrix features_for_crops(const std::vector<Image8>& crops, FeatureCombo combo,
                                 const FeatureLayout& layout, int threads) {
    FeatureMatrix m(static_cast<int>(crops.size()), layout.count());
    parallel_for(static_cast<int>(crops.size()), threads, [&](int i) {
        const ChannelStack stack = build_channels(crops[i], combo);
        if (stack.width != layout.cell_w || stack.height != layout.cell_h ||
            stack.channel_count() != layout.channels)
            throw InvalidInput("features_for_crops: crop does not match the layout");
        float* row = m.row(i);
        size_t k = 0;
        for (int c = 0; c < layout.channels; ++c)
            for (int cy = 0; cy < layout.cell_h; ++cy)
                for (int cx = 0; cx < layout.cell_w; ++cx) row[k++] = stack.channels[c].at(cx, cy);
    });
    return m;
}

TrainingCorpus build_corpus(const std::vector<AnnotatedSample>& annotations,
                            const std::string& class_name) {
    TrainingCorpus corpus;
    std::set<std::string> images;
    for (const AnnotatedSample& s : annotations) {
        if (s.class_name == class_name) corpus.positives.push_back(s);
        corpus.exclusion[s.image_path].push_back(s.box);
        images.insert(s.image_path);
    }
    corpus.negative_images.assign(images.begin(), images.end());
    return corpus;
}

SubcategoryLayout cluster_class(const ClassConfig& cc,
                                const std::vector<AnnotatedSample>& class_samples,
                                ImageCache& images, uint64_t seed) {
    SubcatOptions options;
    options.K = cc.K;
    options.space = cc.space;
    options.window = cc.window;
    options.min_cluster = cc.min_cluster;
    options.seed = seed;
    SubcategoryLayout layout;
    if (cc.space == SubcatSpace::Visual) {
        std::vector<Image8> crops;
        crops.reserve(class_samples.size());
        for (const AnnotatedSample& s : class_samples) {
            const Image8& img = images.get(s.image_path);
            const int left = static_cast<int>(std::lround(s.box.left));
            const int top = static_cast<int>(std::lround(s.box.top));
            const int w = std::max(1, static_cast<int>(std::lround(s.box.width())));
            const int h = std::max(1, static_cast<int>(std::lround(s.box.height())));
            crops.push_back(crop_replicate(img, left, top, w, h));
        }
        layout = subcategorize(class_samples, options, &crops);
    } else {
        layout = subcategorize(class_samples, options);
    }
    layout.class_name = cc.name;
    return layout;
}

namespace {

class ImageTrainingSource final : public TrainingSource {
  public:
    ImageTrainingSource(const ClassConfig& cc, const TrainingCorpus& corpus,
                        const SubcategoryWindow& window, FeatureMatrix positives,
                        ImageCache& images, int threads)
        : cc_(cc),
          corpus_(corpus),
          window_(window),
          positives_(std::move(positives)),
          images_(images),
          threads_(threads),
          layout_(layout_for_window(window.padded_w, window.padded_h, cc.features)) {}

    const FeatureMatrix& positives() override { return positives_; }

    FeatureMatrix seed_negatives(int count, uint64_t seed) override {
        const int n_images = static_cast<int>(corpus_.negative_images.size());
        if (n_images == 0) return FeatureMatrix(0, layout_.count());
        std::vector<Image8> crops;
        for (int i = 0; i < n_images; ++i) {
            const std::string& path = corpus_.negative_images[i];
            const int share = count / n_images + (i < count % n_images ? 1 : 0);
            if (share == 0) continue;
            const auto it = corpus_.exclusion.find(path);
            static const std::vector<BoundingBox> kNone;
            const std::vector<BoundingBox>& boxes =
                it == corpus_.exclusion.end() ? kNone : it->second;
            std::vector<Image8> part =
                sample_negatives(images_.get(path), boxes, share, window_.padded_w,
                                 window_.padded_h, seed + static_cast<uint64_t>(i));
            for (Image8& c : part) crops.push_back(std::move(c));
        }
        return features_for_crops(crops, cc_.features, layout_, threads_);
    }

    FeatureMatrix harvest_negatives(const BoostedModel& model, int cap, uint64_t) override {
        struct Hit {
            double score;
            int image, level, y, x;
            std::vector<float> row;

            bool operator<(const Hit& o) const {
                if (score != o.score) return score > o.score;
                if (image != o.image) return image < o.image;
                if (level != o.level) return level < o.level;
                if (y != o.y) return y < o.y;
                return x < o.x;
            }
        };
        std::vector<Hit> hits;  // running best `cap`, trimmed as images stream
        const ChannelBuilder builder = combo_builder(cc_.features);
        // the in-progress model carries no window geometry yet; scan a
        // copy stamped with the geometry this source trains against
        BoostedModel scanned = model;
        scanned.layout = layout_;
        scanned.window_w = window_.window_w;
        scanned.window_h = window_.window_h;
        scanned.padded_w = window_.padded_w;
        scanned.padded_h = window_.padded_h;
        scanned.margin_x = window_.margin_x;
        scanned.margin_y = window_.margin_y;
        for (size_t ii = 0; ii < corpus_.negative_images.size(); ++ii) {
            const Image8& img = images_.get(corpus_.negative_images[ii]);
            bool too_small = false;
            const std::vector<PyramidLevel> pyramid = build_pyramid(
                img, builder, scanned.padded_w, scanned.padded_h, threads_, &too_small);
            if (too_small) continue;
            std::vector<RawDetection> raws =
                scan(scanned, pyramid, img.width, img.height, threads_);
            const auto it = corpus_.exclusion.find(corpus_.negative_images[ii]);
            for (const RawDetection& r : raws) {
                bool positive_region = false;
                if (it != corpus_.exclusion.end())
                    for (const BoundingBox& b : it->second)
                        if (pascal_overlap(r.det.box, b) > 0.3) {
                            positive_region = true;
                            break;
                        }
                if (positive_region) continue;
                Hit h;
                h.score = r.det.raw_score;
                h.image = static_cast<int>(ii);
                h.level = r.level;
                h.y = r.cell_y;
                h.x = r.cell_x;
                h.row.resize(layout_.count());
                const ChannelStack& stack = pyramid[r.level].stack;
                size_t k = 0;
                for (int c = 0; c < layout_.channels; ++c)
                    for (int cy = 0; cy < layout_.cell_h; ++cy)
                        for (int cx = 0; cx < layout_.cell_w; ++cx)
                            h.row[k++] = stack.channels[c].row(h.y + cy)[h.x + cx];
                hits.push_back(std::move(h));
            }
            if (static_cast<int>(hits.size()) > 2 * cap) {
                std::nth_element(hits.begin(), hits.begin() + cap, hits.end());
                hits.resize(cap);
            }
        }
        std::sort(hits.begin(), hits.end());
        if (static_cast<int>(hits.size()) > cap) hits.resize(cap);

        FeatureMatrix out(static_cast<int>(hits.size()), layout_.count());
        for (size_t i = 0; i < hits.size(); ++i)
            std::copy(hits[i].row.begin(), hits[i].row.end(), out.row(static_cast<int>(i)));
        return out;
    }

  private:
    const ClassConfig& cc_;
    const TrainingCorpus& corpus_;
    const SubcategoryWindow& window_;
    FeatureMatrix positives_;
    ImageCache& images_;
    int threads_;
    FeatureLayout layout_;
};

// Feature rows of the scan-grid windows that overlap each positive at
// the pyramid levels a detector would meet it on. Their traces widen the
// reject envelope to cover grid and scale quantization, which resized
// training crops never see.
FeatureMatrix aligned_positive_rows(const ClassConfig& cc,
                                    const std::vector<const AnnotatedSample*>& samples,
                                    const SubcategoryWindow& window,
                                    const FeatureLayout& layout, ImageCache& images) {
    const ChannelBuilder builder = combo_builder(cc.features);
    std::vector<std::vector<float>> rows;
    for (const AnnotatedSample* s : samples) {
        const Image8& img = images.get(s->image_path);
        const double box_h = s->box.bottom - s->box.top;
        if (box_h <= 0) continue;
        const double ideal = 8.0 * std::log2(box_h / window.window_h);
        const int center = static_cast<int>(std::lround(ideal));
        for (int level = std::max(0, center - 1); level <= center + 1; ++level) {
            const double scale = std::pow(2.0, -level / 8.0);
            const int sw = static_cast<int>(std::lround(img.width * scale));
            const int sh = static_cast<int>(std::lround(img.height * scale));
            if (sw < window.padded_w || sh < window.padded_h) continue;
            const Image8 scaled = level == 0 ? img : resize_bilinear(img, sw, sh);
            const ChannelStack stack = builder(scaled);
            const int ccx = static_cast<int>(
                std::lround((s->box.left * scale - window.margin_x) / kAcfShrink));
            const int ccy = static_cast<int>(
                std::lround((s->box.top * scale - window.margin_y) / kAcfShrink));
            // only the object's best-aligned window per level enters the
            // envelope; weaker candidates may be rejected without costing
            // recall and would otherwise drag every threshold down
            double best = 0.55;
            int best_cx = -1, best_cy = -1;
            for (int cy = ccy - 4; cy <= ccy + 4; ++cy) {
                if (cy < 0 || cy + layout.cell_h > stack.height) continue;
                for (int cx = ccx - 4; cx <= ccx + 4; ++cx) {
                    if (cx < 0 || cx + layout.cell_w > stack.width) continue;
                    const BoundingBox got{(cx * kAcfShrink + window.margin_x) / scale,
                                          (cy * kAcfShrink + window.margin_y) / scale,
                                          (cx * kAcfShrink + window.margin_x + window.window_w) / scale,
                                          (cy * kAcfShrink + window.margin_y + window.window_h) / scale};
                    const double v = pascal_overlap(got, s->box);
                    if (v > best) {
                        best = v;
                        best_cx = cx;
                        best_cy = cy;
                    }
                }
            }
            if (best_cx < 0) continue;
            std::vector<float> row(static_cast<size_t>(layout.count()));
            size_t k = 0;
            for (int c = 0; c < layout.channels; ++c)
                for (int yy = 0; yy < layout.cell_h; ++yy)
                    for (int xx = 0; xx < layout.cell_w; ++xx)
                        row[k++] = stack.channels[c].row(best_cy + yy)[best_cx + xx];
            rows.push_back(std::move(row));
        }
    }
    FeatureMatrix out(static_cast<int>(rows.size()), layout.count());
    for (size_t i = 0; i < rows.size(); ++i)
        std::copy(rows[i].begin(), rows[i].end(), out.row(static_cast<int>(i)));
    return out;
}

}  // namespace

TrainedClass train_class(const ClassConfig& cc, const TrainingCorpus& corpus,
                         const SubcategoryLayout& layout, ImageCache& images, int threads,
                         uint64_t seed) {
    if (corpus.positives.empty()) throw DataError("no positives for class " + cc.name);
    if (layout.assignments.size() != corpus.positives.size())
        throw InvalidInput("train_class: layout does not match the corpus");
    TrainedClass trained;
    trained.name = cc.name;
    trained.layout = layout;
    for (int k = 0; k < layout.K; ++k) {
        const SubcategoryWindow& window = layout.windows[k];
        const FeatureLayout feat_layout =
            layout_for_window(window.padded_w, window.padded_h, cc.features);

        std::vector<Image8> crops;
        std::vector<const AnnotatedSample*> members;
        for (size_t i = 0; i < corpus.positives.size(); ++i) {
            if (layout.assignments[i] != k) continue;
            const AnnotatedSample& s = corpus.positives[i];
            members.push_back(&s);
            std::vector<Image8> copies =
                jitter(images.get(s.image_path), s.box, window.window_h, window.padded_w,
                       window.padded_h, cc.jitter, seed * 1315423911ull + i);
            for (Image8& c : copies) crops.push_back(std::move(c));
        }
        if (crops.empty()) throw DataError("subcategory without positives in class " + cc.name);
        FeatureMatrix pos = features_for_crops(crops, cc.features, feat_layout, threads);

        ImageTrainingSource source(cc, corpus, window, std::move(pos), images, threads);
        BootstrapOptions options;
        options.schedule = cc.schedule;
        options.nu = cc.nu;
        options.depth = cc.depth;
        options.neg_seed_count = cc.neg_seed_count;
        options.hard_neg_cap = cc.hard_neg_cap;
        options.threads = threads;
        options.seed = seed + static_cast<uint64_t>(k) * 7919;

        TrainedSubcat sub;
        FeatureMatrix pool;
        sub.model = bootstrap_train(source, options, &sub.report, &pool);
        sub.model.class_name = cc.name;
        sub.model.subcategory = k;
        sub.model.layout = feat_layout;
        sub.model.window_w = window.window_w;
        sub.model.window_h = window.window_h;
        sub.model.padded_w = window.padded_w;
        sub.model.padded_h = window.padded_h;
        sub.model.margin_x = window.margin_x;
        sub.model.margin_y = window.margin_y;

        // Widen the reject envelope with scan-aligned positive windows so
        // grid and scale quantization at detect time cannot reject objects
        // the full score would accept.
        if (!sub.model.trees.empty()) {
            const FeatureMatrix aligned =
                aligned_positive_rows(cc, members, window, feat_layout, images);
            if (aligned.rows > 0) {
                auto traces = positive_traces(sub.model, source.positives());
                auto extra = positive_traces(sub.model, aligned);
                traces.insert(traces.end(), std::make_move_iterator(extra.begin()),
                              std::make_move_iterator(extra.end()));
                sub.model.rejects = compute_reject_thresholds(traces);
            }
        }

        // Calibration on training positives plus hard negatives; the seed
        // pool stands in when no round harvested anything.
        const FeatureMatrix& pos_rows = source.positives();
        const int first_hard = sub.report.seed_negative_rows;
        const int hard_rows = pool.rows - first_hard;
        std::vector<double> scores;
        std::vector<int8_t> labels;
        for (int i = 0; i < pos_rows.rows; ++i) {
            scores.push_back(boosted_score(sub.model, pos_rows.row(i)));
            labels.push_back(1);
        }
        const int neg_begin = hard_rows > 0 ? first_hard : 0;
        for (int i = neg_begin; i < pool.rows; ++i) {
            scores.push_back(boosted_score(sub.model, pool.row(i)));
            labels.push_back(-1);
        }
        if (pool.rows > 0) sub.model.calibration = fit_platt(scores, labels);
        trained.subcats.push_back(std::move(sub));
    }
    return trained;
}

DetectorBank assemble_bank(const PipelineConfig& config,
                           const std::vector<TrainedClass>& classes) {
    DetectorBank bank;
    for (const TrainedClass& tc : classes) {
        ClassDetectors cd;
        cd.name = tc.name;
        cd.nms_threshold = class_config(config, tc.name).nms_threshold;
        for (const TrainedSubcat& sub : tc.subcats) cd.models.push_back(sub.model);
        bank.classes.push_back(std::move(cd));
    }
    return bank;
}

DetectorBank load_bank(const PipelineConfig& config) {
    if (config.paths.model_dir.empty()) throw ConfigError("paths.model_dir not set");
    DetectorBank bank;
    for (const ClassConfig& cc : config.classes) {
        ClassDetectors cd;
        cd.name = cc.name;
        cd.nms_threshold = cc.nms_threshold;
        for (int k = 0;; ++k) {
            const fs::path p =
                fs::path(config.paths.model_dir) / (cc.name + "_" + std::to_string(k) + ".model");
            if (!fs::exists(p)) break;
            cd.models.push_back(read_model(p.string()));
        }
        if (cd.models.empty())
            throw DataError("no models for class " + cc.name + " in " + config.paths.model_dir);
        bank.classes.push_back(std::move(cd));
    }
    return bank;
}

FeatureCombo bank_combo(const DetectorBank& bank) {
    bool lbp = false, cov = false;
    for (const ClassDetectors& cd : bank.classes)
        for (const BoostedModel& m : cd.models) {
            const FeatureCombo combo = parse_combo(m.layout.family);
            lbp = lbp || combo == FeatureCombo::AcfLbp || combo == FeatureCombo::All;
            cov = cov || combo == FeatureCombo::AcfCov || combo == FeatureCombo::All;
        }
    if (lbp && cov) return FeatureCombo::All;
    if (lbp) return FeatureCombo::AcfLbp;
    if (cov) return FeatureCombo::AcfCov;
    return FeatureCombo::Acf;
}

ChannelBuilder combo_builder(FeatureCombo combo) {
    return [combo](const Image8& img) { return build_channels(img, combo); };
}

std::vector<AnnotatedSample> load_annotations(const PipelineConfig& config) {
    const PathsConfig& p = config.paths;
    if (p.format == "kitti") {
        if (p.label_dir.empty()) throw ConfigError("paths.label_dir not set for kitti format");
        std::vector<std::string> keep;
        for (const ClassConfig& c : config.classes) keep.push_back(c.name);
        return load_kitti_labels(p.label_dir, p.image_dir, keep, config.difficulty);
    }
    if (p.annotations.empty()) throw ConfigError("paths.annotations not set");
    if (p.class_map.empty()) throw ConfigError("paths.class_map not set");
    std::vector<AnnotatedSample> samples =
        load_csv_annotations(p.annotations, load_class_map(p.class_map), p.csv_header);
    if (!p.image_dir.empty())
        for (AnnotatedSample& s : samples)
            s.image_path = (fs::path(p.image_dir) / s.image_path).string();
    return samples;
}

}  // namespace tsd
