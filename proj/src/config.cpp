#include "tsdet/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tsdet/errors.hpp"

namespace tsd {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
T get_or(const json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad value for '" + key + "'");
    }
}

SubcatSpace parse_space(const std::string& s) {
    if (s == "geometric") return SubcatSpace::Geometric;
    if (s == "visual") return SubcatSpace::Visual;
    if (s == "aspect") return SubcatSpace::AspectOnly;
    throw ConfigError("unknown clustering space: " + s);
}

MatchProtocol parse_protocol(const std::string& s) {
    if (s == "gtsdb") return MatchProtocol::Gtsdb;
    if (s == "kitti") return MatchProtocol::Kitti;
    throw ConfigError("unknown match protocol: " + s);
}

WindowPolicy parse_window(const json& obj, const std::string& where) {
    WindowPolicy w;
    reject_unknown(obj, {"fixed", "w", "h", "padded_w", "padded_h", "base_height", "margin"},
                   where);
    w.fixed = get_or(obj, "fixed", false);
    if (w.fixed) {
        w.fixed_w = get_or(obj, "w", w.fixed_w);
        w.fixed_h = get_or(obj, "h", w.fixed_h);
        w.fixed_padded_w = get_or(obj, "padded_w", w.fixed_padded_w);
        w.fixed_padded_h = get_or(obj, "padded_h", w.fixed_padded_h);
        if (w.fixed_w < 8 || w.fixed_h < 8) throw ConfigError(where + ": window below 8 px");
        if (w.fixed_padded_w < w.fixed_w || w.fixed_padded_h < w.fixed_h)
            throw ConfigError(where + ": padded window smaller than the window");
    } else {
        w.base_height = get_or(obj, "base_height", w.base_height);
        w.margin = get_or(obj, "margin", w.margin);
        if (w.base_height < 8) throw ConfigError(where + ": base height below 8 px");
        if (w.margin < 0) throw ConfigError(where + ": negative margin");
    }
    return w;
}

JitterParams parse_jitter(const json& obj, const std::string& where) {
    JitterParams j;
    reject_unknown(obj, {"copies", "translate", "scale_min", "scale_max", "rotate", "flip"}, where);
    j.copies = get_or(obj, "copies", 1);
    j.max_translate = get_or(obj, "translate", 0.0);
    j.min_scale = get_or(obj, "scale_min", 1.0);
    j.max_scale = get_or(obj, "scale_max", 1.0);
    j.max_rotate_deg = get_or(obj, "rotate", 0.0);
    j.allow_flip = get_or(obj, "flip", false);
    if (j.copies < 1) throw ConfigError(where + ": jitter copies must be >= 1");
    if (j.max_translate < 0 || j.max_rotate_deg < 0)
        throw ConfigError(where + ": negative jitter magnitude");
    if (!(j.min_scale > 0 && j.max_scale >= j.min_scale))
        throw ConfigError(where + ": bad jitter scale range");
    return j;
}

ClassConfig parse_class(const json& obj) {
    if (!obj.contains("name")) throw ConfigError("class entry without name");
    ClassConfig c;
    c.name = obj.at("name").get<std::string>();
    const std::string where = "class " + c.name;
    reject_unknown(obj,
                   {"name", "K", "space", "window", "min_cluster", "jitter", "nu", "depth",
                    "schedule", "features", "neg_seed", "hard_neg_cap", "nms", "eval_overlap",
                    "protocol", "difficulty", "uiuc_tolerance"},
                   where);
    c.K = get_or(obj, "K", 1);
    if (c.K < 1) throw ConfigError(where + ": K must be >= 1");
    c.space = parse_space(get_or<std::string>(obj, "space", "geometric"));
    if (obj.contains("window")) c.window = parse_window(obj.at("window"), where + ".window");
    c.min_cluster = get_or(obj, "min_cluster", 20);
    if (c.min_cluster < 1) throw ConfigError(where + ": min_cluster must be >= 1");
    if (obj.contains("jitter")) c.jitter = parse_jitter(obj.at("jitter"), where + ".jitter");
    c.nu = get_or(obj, "nu", 0.1);
    if (!(c.nu > 0 && c.nu <= 1)) throw ConfigError(where + ": nu must be in (0,1]");
    c.depth = get_or(obj, "depth", 2);
    if (c.depth < 1 || c.depth > 5) throw ConfigError(where + ": depth must be in 1..5");
    c.schedule = get_or(obj, "schedule", c.schedule);
    if (c.schedule.empty()) throw ConfigError(where + ": empty schedule");
    for (size_t i = 0; i < c.schedule.size(); ++i) {
        if (c.schedule[i] < 1) throw ConfigError(where + ": schedule entries must be >= 1");
        if (i > 0 && c.schedule[i] < c.schedule[i - 1])
            throw ConfigError(where + ": schedule must be non-decreasing");
    }
    c.features = parse_combo(get_or<std::string>(obj, "features", "acf"));
    c.neg_seed_count = get_or(obj, "neg_seed", 5000);
    c.hard_neg_cap = get_or(obj, "hard_neg_cap", 10000);
    if (c.neg_seed_count < 1 || c.hard_neg_cap < 0)
        throw ConfigError(where + ": bad negative sampling counts");
    c.nms_threshold = get_or(obj, "nms", 0.5);
    if (!(c.nms_threshold > 0 && c.nms_threshold <= 1))
        throw ConfigError(where + ": nms must be in (0,1]");
    c.eval_overlap = get_or(obj, "eval_overlap", 0.5);
    if (!(c.eval_overlap > 0 && c.eval_overlap <= 1))
        throw ConfigError(where + ": eval_overlap must be in (0,1]");
    c.protocol = parse_protocol(get_or<std::string>(obj, "protocol", "gtsdb"));
    c.max_difficulty = get_or(obj, "difficulty", 2);
    if (c.max_difficulty < 0 || c.max_difficulty > 2)
        throw ConfigError(where + ": difficulty must be 0..2");
    c.uiuc_tolerance = get_or(obj, "uiuc_tolerance", false);
    return c;
}

PathsConfig parse_paths(const json& obj) {
    PathsConfig p;
    reject_unknown(obj,
                   {"format", "image_dir", "label_dir", "annotations", "class_map", "csv_header",
                    "model_dir", "output_dir"},
                   "paths");
    p.format = get_or<std::string>(obj, "format", "csv");
    if (p.format != "csv" && p.format != "kitti")
        throw ConfigError("paths.format must be csv or kitti");
    p.image_dir = get_or<std::string>(obj, "image_dir", "");
    p.label_dir = get_or<std::string>(obj, "label_dir", "");
    p.annotations = get_or<std::string>(obj, "annotations", "");
    p.class_map = get_or<std::string>(obj, "class_map", "");
    p.csv_header = get_or(obj, "csv_header", false);
    p.model_dir = get_or<std::string>(obj, "model_dir", "");
    p.output_dir = get_or<std::string>(obj, "output_dir", "");
    return p;
}

void apply_env_overrides(PathsConfig& p) {
    const auto over = [](std::string& field, const char* var) {
        if (const char* v = std::getenv(var)) field = v;
    };
    over(p.image_dir, "TSDET_IMAGE_DIR");
    over(p.label_dir, "TSDET_LABEL_DIR");
    over(p.annotations, "TSDET_ANNOTATIONS");
    over(p.class_map, "TSDET_CLASS_MAP");
    over(p.model_dir, "TSDET_MODEL_DIR");
    over(p.output_dir, "TSDET_OUTPUT_DIR");
}

}  // namespace

PipelineConfig parse_config_text(const std::string& text, const std::string& origin) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    if (!root.is_object()) throw ConfigError(origin + ": top level must be an object");
    reject_unknown(root, {"seed", "paths", "difficulty_rule", "classes"}, origin);
    PipelineConfig config;
    config.seed = get_or<uint64_t>(root, "seed", 1);
    if (root.contains("paths")) config.paths = parse_paths(root.at("paths"));
    if (root.contains("difficulty_rule")) {
        const json& d = root.at("difficulty_rule");
        reject_unknown(d, {"min_height", "max_occlusion", "max_truncation"}, "difficulty_rule");
        const auto fill3 = [&](const char* key, auto* dst) {
            if (!d.contains(key)) return;
            const auto v = d.at(key);
            if (!v.is_array() || v.size() != 3)
                throw ConfigError(std::string("difficulty_rule.") + key + " must have 3 entries");
            for (int i = 0; i < 3; ++i) dst[i] = v.at(i);
        };
        fill3("min_height", config.difficulty.min_height);
        fill3("max_occlusion", config.difficulty.max_occlusion);
        fill3("max_truncation", config.difficulty.max_truncation);
    }
    if (root.contains("classes")) {
        if (!root.at("classes").is_array()) throw ConfigError("classes must be an array");
        for (const json& entry : root.at("classes")) config.classes.push_back(parse_class(entry));
    }
    std::set<std::string> names;
    for (const ClassConfig& c : config.classes)
        if (!names.insert(c.name).second) throw ConfigError("duplicate class: " + c.name);
    apply_env_overrides(config.paths);
    return config;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

const ClassConfig& class_config(const PipelineConfig& config, const std::string& name) {
    for (const ClassConfig& c : config.classes)
        if (c.name == name) return c;
    throw ConfigError("class not in config: " + name);
}

}  // namespace tsd
