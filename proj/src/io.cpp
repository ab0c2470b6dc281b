#include "tsdet/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tsdet/errors.hpp"

namespace tsd {

namespace {

constexpr int kModelVersion = 1;
constexpr int kLayoutVersion = 1;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_float(float v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

class LineReader {
  public:
    LineReader(const std::string& path) : path_(path), in_(path) {
        if (!in_) throw DataError("cannot open " + path);
    }

    std::string next_line() {
        std::string line;
        if (!std::getline(in_, line))
            throw DataError(path_ + ": unexpected end of file");
        ++line_no_;
        return line;
    }

    std::istringstream expect(const std::string& key) {
        std::istringstream ls(next_line());
        std::string head;
        ls >> head;
        if (head != key)
            throw DataError(path_ + ":" + std::to_string(line_no_) + ": expected '" + key +
                            "', got '" + head + "'");
        return ls;
    }

    template <class T>
    T value(const std::string& key) {
        std::istringstream ls = expect(key);
        T v;
        if (!(ls >> v))
            throw DataError(path_ + ":" + std::to_string(line_no_) + ": bad value for " + key);
        return v;
    }

    const std::string& path() const { return path_; }
    int line() const { return line_no_; }

  private:
    std::string path_;
    std::ifstream in_;
    int line_no_ = 0;
};

template <class T>
T read_field(LineReader& r, std::istringstream& ls, const std::string& what) {
    T v;
    if (!(ls >> v)) throw DataError(r.path() + ":" + std::to_string(r.line()) + ": bad " + what);
    return v;
}

}  // namespace

void write_model(const std::string& path, const BoostedModel& model) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "tsdet-model " << kModelVersion << "\n";
    out << "class " << model.class_name << "\n";
    out << "subcategory " << model.subcategory << "\n";
    out << "window " << model.window_w << " " << model.window_h << " " << model.padded_w << " "
        << model.padded_h << " " << model.margin_x << " " << model.margin_y << "\n";
    out << "layout " << model.layout.cell_w << " " << model.layout.cell_h << " "
        << model.layout.channels << " " << model.layout.family << "\n";
    out << "nu " << fmt_double(model.nu) << "\n";
    out << "depth " << model.depth << "\n";
    out << "trees " << model.trees.size() << "\n";
    for (size_t t = 0; t < model.trees.size(); ++t) {
        const DecisionTree& tree = model.trees[t];
        out << "tree " << t << " " << tree.depth << "\n";
        out << "nodes " << tree.nodes.size() << "\n";
        for (const TreeNode& n : tree.nodes)
            out << n.feature << " " << fmt_float(n.threshold) << "\n";
        out << "leaves";
        for (int8_t v : tree.leaves) out << " " << static_cast<int>(v);
        out << "\n";
    }
    out << "coeffs " << model.coeffs.size() << "\n";
    for (double c : model.coeffs) out << fmt_double(c) << "\n";
    out << "rejects " << model.rejects.size() << "\n";
    for (double r : model.rejects) out << fmt_double(r) << "\n";
    out << "calibration " << fmt_double(model.calibration.a) << " "
        << fmt_double(model.calibration.b) << " " << (model.calibration.increasing ? 1 : 0)
        << "\n";
    out << "end\n";
    if (!out) throw DataError("write failed: " + path);
}

BoostedModel read_model(const std::string& path) {
    LineReader r(path);
    const int version = r.value<int>("tsdet-model");
    if (version != kModelVersion)
        throw DataError(path + ": unsupported model version " + std::to_string(version));
    BoostedModel m;
    {
        std::istringstream ls = r.expect("class");
        ls >> m.class_name;
    }
    m.subcategory = r.value<int>("subcategory");
    {
        std::istringstream ls = r.expect("window");
        m.window_w = read_field<int>(r, ls, "window");
        m.window_h = read_field<int>(r, ls, "window");
        m.padded_w = read_field<int>(r, ls, "window");
        m.padded_h = read_field<int>(r, ls, "window");
        m.margin_x = read_field<int>(r, ls, "window");
        m.margin_y = read_field<int>(r, ls, "window");
    }
    {
        std::istringstream ls = r.expect("layout");
        m.layout.cell_w = read_field<int>(r, ls, "layout");
        m.layout.cell_h = read_field<int>(r, ls, "layout");
        m.layout.channels = read_field<int>(r, ls, "layout");
        m.layout.family = read_field<std::string>(r, ls, "layout");
    }
    m.nu = r.value<double>("nu");
    m.depth = r.value<int>("depth");
    const int n_trees = r.value<int>("trees");
    if (n_trees < 0) throw DataError(path + ": negative tree count");
    m.trees.resize(n_trees);
    for (int t = 0; t < n_trees; ++t) {
        DecisionTree& tree = m.trees[t];
        {
            std::istringstream ls = r.expect("tree");
            const int idx = read_field<int>(r, ls, "tree index");
            if (idx != t) throw DataError(path + ": tree index mismatch");
            tree.depth = read_field<int>(r, ls, "tree depth");
        }
        if (tree.depth < 1 || tree.depth > 5) throw DataError(path + ": tree depth out of range");
        const int n_nodes = r.value<int>("nodes");
        if (n_nodes != (1 << tree.depth) - 1) throw DataError(path + ": node count mismatch");
        tree.nodes.resize(n_nodes);
        for (TreeNode& node : tree.nodes) {
            std::istringstream ls(r.next_line());
            node.feature = read_field<int32_t>(r, ls, "node feature");
            node.threshold = read_field<float>(r, ls, "node threshold");
        }
        std::istringstream ls = r.expect("leaves");
        tree.leaves.resize(1 << tree.depth);
        for (int8_t& v : tree.leaves) {
            const int vote = read_field<int>(r, ls, "leaf vote");
            if (vote != 1 && vote != -1) throw DataError(path + ": leaf vote must be +-1");
            v = static_cast<int8_t>(vote);
        }
    }
    const int n_coeffs = r.value<int>("coeffs");
    if (n_coeffs != n_trees) throw DataError(path + ": coeff count mismatch");
    m.coeffs.resize(n_coeffs);
    for (double& c : m.coeffs) {
        std::istringstream ls(r.next_line());
        c = read_field<double>(r, ls, "coefficient");
    }
    const int n_rejects = r.value<int>("rejects");
    if (n_rejects != 0 && n_rejects != n_trees)
        throw DataError(path + ": reject count mismatch");
    m.rejects.resize(n_rejects);
    for (double& rej : m.rejects) {
        std::istringstream ls(r.next_line());
        rej = read_field<double>(r, ls, "reject threshold");
    }
    {
        std::istringstream ls = r.expect("calibration");
        m.calibration.a = read_field<double>(r, ls, "calibration");
        m.calibration.b = read_field<double>(r, ls, "calibration");
        m.calibration.increasing = read_field<int>(r, ls, "calibration") != 0;
    }
    r.expect("end");
    return m;
}

void write_layout(const std::string& path, const SubcategoryLayout& layout) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "tsdet-layout " << kLayoutVersion << "\n";
    out << "class " << layout.class_name << "\n";
    out << "K " << layout.K << "\n";
    out << "merged_small " << (layout.merged_small ? 1 : 0) << "\n";
    for (int c = 0; c < layout.K; ++c) {
        const SubcategoryWindow& w = layout.windows[c];
        out << "window " << c << " " << w.window_w << " " << w.window_h << " " << w.padded_w << " "
            << w.padded_h << " " << w.margin_x << " " << w.margin_y << " " << w.size << " "
            << w.medoid << "\n";
    }
    out << "assignments " << layout.assignments.size() << "\n";
    for (size_t i = 0; i < layout.assignments.size(); ++i)
        out << layout.assignments[i] << (i + 1 < layout.assignments.size() ? ' ' : '\n');
    if (layout.assignments.empty()) out << "\n";
    out << "notes " << layout.notes.size() << "\n";
    for (const std::string& n : layout.notes) out << n << "\n";
    out << "end\n";
    if (!out) throw DataError("write failed: " + path);
}

SubcategoryLayout read_layout(const std::string& path) {
    LineReader r(path);
    const int version = r.value<int>("tsdet-layout");
    if (version != kLayoutVersion)
        throw DataError(path + ": unsupported layout version " + std::to_string(version));
    SubcategoryLayout layout;
    {
        std::istringstream ls = r.expect("class");
        ls >> layout.class_name;
    }
    layout.K = r.value<int>("K");
    if (layout.K < 1) throw DataError(path + ": K must be >= 1");
    layout.merged_small = r.value<int>("merged_small") != 0;
    layout.windows.resize(layout.K);
    for (int c = 0; c < layout.K; ++c) {
        std::istringstream ls = r.expect("window");
        const int idx = read_field<int>(r, ls, "window index");
        if (idx != c) throw DataError(path + ": window index mismatch");
        SubcategoryWindow& w = layout.windows[c];
        w.window_w = read_field<int>(r, ls, "window");
        w.window_h = read_field<int>(r, ls, "window");
        w.padded_w = read_field<int>(r, ls, "window");
        w.padded_h = read_field<int>(r, ls, "window");
        w.margin_x = read_field<int>(r, ls, "window");
        w.margin_y = read_field<int>(r, ls, "window");
        w.size = read_field<int>(r, ls, "window");
        w.medoid = read_field<int>(r, ls, "window");
    }
    const int n = r.value<int>("assignments");
    if (n < 0) throw DataError(path + ": negative assignment count");
    layout.assignments.resize(n);
    {
        std::istringstream ls(r.next_line());
        for (int& a : layout.assignments) {
            a = read_field<int>(r, ls, "assignment");
            if (a < 0 || a >= layout.K) throw DataError(path + ": assignment out of range");
        }
    }
    const int n_notes = r.value<int>("notes");
    layout.notes.resize(std::max(n_notes, 0));
    for (std::string& note : layout.notes) note = r.next_line();
    r.expect("end");
    return layout;
}

void write_detections(const std::string& path, const std::vector<DetectionRecord>& records) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "image_id class subcat left top right bottom raw_score calibrated_score\n";
    char buf[512];
    for (const DetectionRecord& rec : records) {
        const Detection& d = rec.det;
        std::snprintf(buf, sizeof(buf), "%s %s %d %.6f %.6f %.6f %.6f %.6f %.6f\n",
                      rec.image_id.c_str(), d.class_name.c_str(), d.subcategory, d.box.left,
                      d.box.top, d.box.right, d.box.bottom, d.raw_score, d.calibrated_score);
        out << buf;
    }
    if (!out) throw DataError("write failed: " + path);
}

std::vector<DetectionRecord> read_detections(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<DetectionRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || line.empty()) continue;  // header
        std::istringstream ls(line);
        DetectionRecord rec;
        if (!(ls >> rec.image_id >> rec.det.class_name >> rec.det.subcategory >>
              rec.det.box.left >> rec.det.box.top >> rec.det.box.right >> rec.det.box.bottom >>
              rec.det.raw_score >> rec.det.calibrated_score))
            throw DataError(path + ":" + std::to_string(line_no) + ": malformed detection line");
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace tsd
