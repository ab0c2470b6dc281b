#include "tsdet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tsdet/errors.hpp"
#include "tsdet/rng.hpp"

namespace fs = std::filesystem;

namespace tsd {

int DifficultyRule::classify(double height, int occlusion, double truncation) const {
    for (int level = 0; level < 3; ++level) {
        if (height >= min_height[level] && occlusion <= max_occlusion[level] &&
            truncation <= max_truncation[level])
            return level;
    }
    return kDifficultyIgnored;
}

namespace {

std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) out.push_back(field);
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("bad numeric field '" + s + "' in " + where);
    }
}

}  // namespace

std::vector<AnnotatedSample> load_kitti_labels(const std::string& label_dir,
                                               const std::string& image_dir,
                                               const std::vector<std::string>& keep_types,
                                               const DifficultyRule& rule, DatasetReport* report) {
    if (!fs::is_directory(label_dir)) throw DataError("label directory not found: " + label_dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(label_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".txt")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    std::vector<AnnotatedSample> samples;
    for (const fs::path& file : files) {
        std::ifstream in(file);
        if (!in) throw DataError("cannot open " + file.string());
        const std::string image_path =
            (fs::path(image_dir) / file.stem()).string() + ".png";
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::vector<std::string> f;
            std::string tok;
            while (ls >> tok) f.push_back(tok);
            const std::string where = file.string() + ":" + std::to_string(line_no);
            if (f.size() < 15) throw DataError("malformed label line at " + where);
            const std::string& type = f[0];
            if (!keep_types.empty() &&
                std::find(keep_types.begin(), keep_types.end(), type) == keep_types.end()) {
                if (report) ++report->skipped_unknown_type;
                continue;
            }
            AnnotatedSample s;
            s.image_path = image_path;
            s.class_name = type;
            s.truncation = parse_double(f[1], where);
            s.has_truncation = true;
            const double occ = parse_double(f[2], where);
            s.occlusion_index = occ < 0 ? 3 : std::min(static_cast<int>(occ), 3);
            s.has_occlusion = true;
            s.orientation = parse_double(f[3], where);
            s.has_orientation = true;
            s.box = {parse_double(f[4], where), parse_double(f[5], where),
                     parse_double(f[6], where), parse_double(f[7], where)};
            if (!(s.box.right > s.box.left && s.box.bottom > s.box.top))
                throw DataError("empty box at " + where);
            s.difficulty = rule.classify(s.box.height(), s.occlusion_index, s.truncation);
            samples.push_back(std::move(s));
        }
    }
    return samples;
}

std::map<int, std::string> load_class_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open class map: " + path);
    std::map<int, std::string> map;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        int id;
        std::string name;
        if (!(ls >> id)) continue;
        if (!(ls >> name))
            throw DataError("class map " + path + ":" + std::to_string(line_no) + ": missing name");
        map[id] = name;
    }
    return map;
}

std::vector<AnnotatedSample> load_csv_annotations(const std::string& path,
                                                  const std::map<int, std::string>& class_map,
                                                  bool header_row) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open annotations: " + path);
    std::vector<AnnotatedSample> samples;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header_row && line_no == 1) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        const std::vector<std::string> f = split_fields(line, ';');
        if (f.size() != 6) throw DataError("expected 6 fields at " + where);
        AnnotatedSample s;
        s.image_path = f[0];
        s.box = {parse_double(f[1], where), parse_double(f[2], where), parse_double(f[3], where),
                 parse_double(f[4], where)};
        if (!(s.box.right > s.box.left && s.box.bottom > s.box.top))
            throw DataError("empty box at " + where);
        const int id = static_cast<int>(parse_double(f[5], where));
        const auto it = class_map.find(id);
        if (it == class_map.end())
            throw DataError("class id " + std::to_string(id) + " not in class map at " + where);
        s.class_name = it->second;
        samples.push_back(std::move(s));
    }
    return samples;
}

void write_csv_annotations(const std::string& path, const std::vector<AnnotatedSample>& samples,
                           const std::map<int, std::string>& class_map) {
    std::map<std::string, int> inverse;
    for (const auto& [id, name] : class_map) inverse[name] = id;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    char buf[256];
    for (const AnnotatedSample& s : samples) {
        const auto it = inverse.find(s.class_name);
        if (it == inverse.end()) throw DataError("class not in map: " + s.class_name);
        std::snprintf(buf, sizeof(buf), "%s;%.17g;%.17g;%.17g;%.17g;%d\n", s.image_path.c_str(),
                      s.box.left, s.box.top, s.box.right, s.box.bottom, it->second);
        out << buf;
    }
}

std::vector<Image8> jitter(const Image8& image, const BoundingBox& box, int win_h, int pad_w,
                           int pad_h, const JitterParams& params, uint64_t seed) {
    if (params.copies < 1) throw InvalidInput("jitter: copies must be >= 1");
    if (win_h < 1 || pad_w < 1 || pad_h < 1) throw InvalidInput("jitter: bad window dims");
    if (!(params.min_scale > 0 && params.max_scale >= params.min_scale))
        throw InvalidInput("jitter: bad scale range");
    std::mt19937_64 g = seeded_stream(seed, 0);
    std::vector<Image8> crops;
    crops.reserve(params.copies);
    const double cx = (box.left + box.right) / 2;
    const double cy = (box.top + box.bottom) / 2;
    const double base_scale = box.height() / win_h;  // source px per model px
    for (int c = 0; c < params.copies; ++c) {
        double dx = 0, dy = 0, js = 1, rot = 0;
        bool flip = false;
        if (c > 0) {
            dx = uniform_double(g, -params.max_translate, params.max_translate);
            dy = uniform_double(g, -params.max_translate, params.max_translate);
            js = uniform_double(g, params.min_scale, params.max_scale);
            rot = uniform_double(g, -params.max_rotate_deg, params.max_rotate_deg);
            flip = params.allow_flip && unit_double(g) < 0.5;
        }
        const double s = base_scale / js;
        const int src_w = std::max(1, static_cast<int>(std::lround(pad_w * s)));
        const int src_h = std::max(1, static_cast<int>(std::lround(pad_h * s)));
        const int left = static_cast<int>(std::lround(cx + dx * s - src_w / 2.0));
        const int top = static_cast<int>(std::lround(cy + dy * s - src_h / 2.0));
        Image8 crop = crop_rotated(image, left, top, src_w, src_h, rot);
        if (crop.width != pad_w || crop.height != pad_h) crop = resize_bilinear(crop, pad_w, pad_h);
        if (flip) crop = flip_horizontal(crop);
        crops.push_back(std::move(crop));
    }
    return crops;
}

std::vector<Image8> sample_negatives(const Image8& image, const std::vector<BoundingBox>& boxes,
                                     int count, int out_w, int out_h, uint64_t seed,
                                     bool* saturated, std::vector<BoundingBox>* rects_out) {
    if (count < 0) throw InvalidInput("sample_negatives: negative count");
    if (out_w < 1 || out_h < 1) throw InvalidInput("sample_negatives: bad window dims");
    if (saturated) *saturated = false;
    std::vector<Image8> crops;
    if (image.width < out_w || image.height < out_h || count == 0) {
        if (saturated && count > 0) *saturated = true;
        return crops;
    }
    std::mt19937_64 g = seeded_stream(seed, 0);
    const double max_scale = std::min(image.width / static_cast<double>(out_w),
                                      image.height / static_cast<double>(out_h));
    const int64_t max_attempts = static_cast<int64_t>(count) * 50 + 50;
    int64_t attempts = 0;
    while (static_cast<int>(crops.size()) < count && attempts < max_attempts) {
        ++attempts;
        const double s = std::exp(uniform_double(g, 0.0, std::log(max_scale)));
        const int w = std::min(image.width, static_cast<int>(std::lround(out_w * s)));
        const int h = std::min(image.height, static_cast<int>(std::lround(out_h * s)));
        const int left = uniform_index(g, image.width - w + 1);
        const int top = uniform_index(g, image.height - h + 1);
        const BoundingBox window{static_cast<double>(left), static_cast<double>(top),
                                 static_cast<double>(left + w), static_cast<double>(top + h)};
        bool clear = true;
        for (const BoundingBox& b : boxes)
            if (pascal_overlap(window, b) > 0.1) {
                clear = false;
                break;
            }
        if (!clear) continue;
        Image8 crop = crop_replicate(image, left, top, w, h);
        if (w != out_w || h != out_h) crop = resize_bilinear(crop, out_w, out_h);
        if (rects_out) rects_out->push_back(window);
        crops.push_back(std::move(crop));
    }
    if (saturated && static_cast<int>(crops.size()) < count) *saturated = true;
    return crops;
}

}  // namespace tsd
