#include "tsdet/detect.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "tsdet/calibrate.hpp"
#include "tsdet/errors.hpp"
#include "tsdet/features.hpp"
#include "tsdet/parallel.hpp"

namespace tsd {

namespace {

std::atomic<int64_t> g_pyramid_builds{0};

}  // namespace

int64_t pyramid_build_count() { return g_pyramid_builds.load(); }

std::vector<PyramidLevel> build_pyramid(const Image8& image, const ChannelBuilder& builder,
                                        int min_w, int min_h, int threads, bool* too_small) {
    if (image.width == 0 || image.height == 0) throw InvalidInput("build_pyramid: empty image");
    if (min_w < 4 || min_h < 4) throw InvalidInput("build_pyramid: window below 4x4");
    g_pyramid_builds.fetch_add(1);
    if (too_small) *too_small = false;
    if (image.width < min_w || image.height < min_h) {
        if (too_small) *too_small = true;
        return {};
    }
    const double ratio = std::min(image.width / static_cast<double>(min_w),
                                  image.height / static_cast<double>(min_h));
    int levels = static_cast<int>(std::floor(8.0 * std::log2(ratio))) + 1;

    std::vector<double> scales;
    std::vector<int> ws, hs;
    for (int i = 0; i < levels; ++i) {
        const double s = std::pow(2.0, -i / 8.0);
        const int w = static_cast<int>(std::lround(image.width * s));
        const int h = static_cast<int>(std::lround(image.height * s));
        if (w < min_w || h < min_h) break;
        scales.push_back(s);
        ws.push_back(w);
        hs.push_back(h);
    }

    std::vector<PyramidLevel> pyramid(scales.size());
    parallel_for(static_cast<int>(scales.size()), threads, [&](int i) {
        pyramid[i].scale = scales[i];
        const Image8 scaled =
            i == 0 ? image : resize_bilinear(image, ws[i], hs[i]);
        pyramid[i].stack = builder(scaled);
    });
    return pyramid;
}

std::vector<int> stack_channel_map(const FeatureLayout& layout, const ChannelStack& stack) {
    std::vector<int> map(layout.channels);
    if (stack.channel_count() == layout.channels) {
        for (int c = 0; c < layout.channels; ++c) map[c] = c;
        return map;
    }
    // A model trained on a sub-combination finds its channels by name
    // inside the richer shared stack.
    const std::vector<std::string> want = combo_channel_names(parse_combo(layout.family));
    if (static_cast<int>(want.size()) != layout.channels)
        throw InvalidInput("scan: layout family " + layout.family + " expects " +
                           std::to_string(want.size()) + " channels, model declares " +
                           std::to_string(layout.channels));
    for (int c = 0; c < layout.channels; ++c) {
        const auto it = std::find(stack.names.begin(), stack.names.end(), want[c]);
        if (it == stack.names.end())
            throw InvalidInput("scan: shared stack lacks channel " + want[c]);
        map[c] = static_cast<int>(it - stack.names.begin());
    }
    return map;
}

std::vector<RawDetection> scan(const BoostedModel& model, const std::vector<PyramidLevel>& pyramid,
                               int image_w, int image_h, int threads) {
    const FeatureLayout& layout = model.layout;
    if (layout.cell_w < 1 || layout.cell_h < 1 || layout.channels < 1)
        throw InvalidInput("scan: model has no feature layout");
    if (pyramid.empty()) return {};
    const int cells = layout.cell_w * layout.cell_h;
    const std::vector<int> cmap = stack_channel_map(layout, pyramid[0].stack);
    std::vector<std::vector<RawDetection>> per_level(pyramid.size());
    parallel_for(static_cast<int>(pyramid.size()), threads, [&](int li) {
        const PyramidLevel& level = pyramid[li];
        const ChannelStack& stack = level.stack;
        const int span_x = stack.width - layout.cell_w;
        const int span_y = stack.height - layout.cell_h;
        std::vector<RawDetection>& out = per_level[li];
        for (int y0 = 0; y0 <= span_y; ++y0) {
            for (int x0 = 0; x0 <= span_x; ++x0) {
                const auto lookup = [&](int f) {
                    const int c = f / cells;
                    const int rem = f - c * cells;
                    const int cy = rem / layout.cell_w;
                    const int cx = rem - cy * layout.cell_w;
                    return stack.channels[cmap[c]].row(y0 + cy)[x0 + cx];
                };
                const CascadeResult r = cascade_evaluate_fn(model, lookup);
                if (!r.accepted) continue;
                const int shrink = stack.shrink;
                const double inv = 1.0 / level.scale;
                BoundingBox box;
                box.left = (x0 * shrink + model.margin_x) * inv;
                box.top = (y0 * shrink + model.margin_y) * inv;
                box.right = box.left + model.window_w * inv;
                box.bottom = box.top + model.window_h * inv;
                box.left = std::clamp(box.left, 0.0, static_cast<double>(image_w));
                box.top = std::clamp(box.top, 0.0, static_cast<double>(image_h));
                box.right = std::clamp(box.right, 0.0, static_cast<double>(image_w));
                box.bottom = std::clamp(box.bottom, 0.0, static_cast<double>(image_h));
                if (!(box.right > box.left && box.bottom > box.top)) continue;
                RawDetection raw;
                raw.level = li;
                raw.cell_y = y0;
                raw.cell_x = x0;
                raw.det.box = box;
                raw.det.subcategory = model.subcategory;
                raw.det.raw_score = r.score;
                out.push_back(std::move(raw));
            }
        }
    });
    std::vector<RawDetection> merged;
    for (auto& v : per_level)
        for (auto& r : v) merged.push_back(std::move(r));
    return merged;
}

std::vector<Detection> nms(const std::vector<Detection>& dets, double threshold) {
    if (!(threshold > 0 && threshold <= 1)) throw InvalidInput("nms: threshold must be in (0,1]");
    std::vector<int> order(dets.size());
    for (size_t i = 0; i < dets.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return dets[a].calibrated_score > dets[b].calibrated_score;
    });
    std::vector<Detection> kept;
    for (int idx : order) {
        bool ok = true;
        for (const Detection& k : kept)
            if (pascal_overlap(dets[idx].box, k.box) > threshold) {
                ok = false;
                break;
            }
        if (ok) kept.push_back(dets[idx]);
    }
    return kept;
}

std::vector<Detection> fuse(const std::vector<std::vector<Detection>>& per_class,
                            const std::vector<double>& thresholds) {
    if (per_class.size() != thresholds.size()) throw InvalidInput("fuse: threshold count mismatch");
    std::vector<Detection> out;
    for (size_t c = 0; c < per_class.size(); ++c) {
        std::vector<Detection> survivors = nms(per_class[c], thresholds[c]);
        out.insert(out.end(), survivors.begin(), survivors.end());
    }
    return out;
}

std::vector<Detection> detect_all(const Image8& image, const DetectorBank& bank,
                                  const ChannelBuilder& builder, int threads, DetectStats* stats) {
    if (stats) *stats = DetectStats{};
    if (bank.classes.empty()) return {};
    int max_w = 0, max_h = 0;
    for (const ClassDetectors& cls : bank.classes) {
        if (cls.models.empty()) throw InvalidInput("detect_all: class without models: " + cls.name);
        for (const BoostedModel& m : cls.models) {
            max_w = std::max(max_w, m.padded_w);
            max_h = std::max(max_h, m.padded_h);
        }
    }
    bool too_small = false;
    const std::vector<PyramidLevel> pyramid =
        build_pyramid(image, builder, max_w, max_h, threads, &too_small);
    if (stats) {
        stats->pyramids_built = 1;
        stats->levels = static_cast<int>(pyramid.size());
    }
    if (pyramid.empty()) return {};

    std::vector<std::vector<Detection>> per_class;
    std::vector<double> thresholds;
    for (size_t ci = 0; ci < bank.classes.size(); ++ci) {
        const ClassDetectors& cls = bank.classes[ci];
        std::vector<RawDetection> raws;
        for (size_t mi = 0; mi < cls.models.size(); ++mi) {
            const BoostedModel& model = cls.models[mi];
            if (stats)
                for (const PyramidLevel& level : pyramid) {
                    const int64_t sx = level.stack.width - model.layout.cell_w + 1;
                    const int64_t sy = level.stack.height - model.layout.cell_h + 1;
                    if (sx > 0 && sy > 0) stats->windows_evaluated += sx * sy;
                }
            std::vector<RawDetection> part = scan(model, pyramid, image.width, image.height, threads);
            for (RawDetection& r : part) {
                r.model = static_cast<int>(mi);
                r.det.class_id = static_cast<int>(ci);
                r.det.class_name = cls.name;
                r.det.calibrated_score = calibrate_score(model.calibration, r.det.raw_score);
                raws.push_back(std::move(r));
            }
        }
        std::stable_sort(raws.begin(), raws.end(), [](const RawDetection& a, const RawDetection& b) {
            if (a.level != b.level) return a.level < b.level;
            if (a.cell_y != b.cell_y) return a.cell_y < b.cell_y;
            if (a.cell_x != b.cell_x) return a.cell_x < b.cell_x;
            return a.model < b.model;
        });
        std::vector<Detection> dets;
        dets.reserve(raws.size());
        for (RawDetection& r : raws) dets.push_back(std::move(r.det));
        per_class.push_back(std::move(dets));
        thresholds.push_back(cls.nms_threshold);
    }
    return fuse(per_class, thresholds);
}

}  // namespace tsd
