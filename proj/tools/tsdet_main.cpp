#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tsdet/config.hpp"
#include "tsdet/errors.hpp"
#include "tsdet/eval.hpp"
#include "tsdet/io.hpp"
#include "tsdet/pipeline.hpp"

namespace fs = std::filesystem;
using namespace tsd;

namespace {

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

std::vector<std::string> read_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open image list: " + path);
    std::vector<std::string> paths;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) paths.push_back(line);
    }
    return paths;
}

void ensure_dir(const std::string& dir) {
    if (!dir.empty()) fs::create_directories(dir);
}

std::vector<AnnotatedSample> class_samples(const std::vector<AnnotatedSample>& all,
                                           const std::string& name) {
    std::vector<AnnotatedSample> out;
    for (const AnnotatedSample& s : all)
        if (s.class_name == name) out.push_back(s);
    return out;
}

std::string layout_path(const PipelineConfig& config, const std::string& cls) {
    return (fs::path(config.paths.model_dir) / (cls + ".layout")).string();
}

int cmd_cluster(const PipelineConfig& config, const std::string& cls) {
    const ClassConfig& cc = class_config(config, cls);
    const std::vector<AnnotatedSample> samples = class_samples(load_annotations(config), cls);
    if (samples.empty()) throw DataError("no annotations for class " + cls);
    ImageCache images;
    const SubcategoryLayout layout = cluster_class(cc, samples, images, config.seed);
    ensure_dir(config.paths.model_dir);
    ensure_dir(config.paths.output_dir);
    write_layout(layout_path(config, cls), layout);
    const std::string report = cluster_report(layout);
    if (!config.paths.output_dir.empty()) {
        std::ofstream out(fs::path(config.paths.output_dir) / (cls + ".cluster.txt"));
        out << report;
    }
    std::cout << report;
    return 0;
}

std::string training_report_text(const TrainedClass& trained) {
    std::ostringstream out;
    out << "class " << trained.name << "\n";
    for (size_t k = 0; k < trained.subcats.size(); ++k) {
        const TrainedSubcat& sub = trained.subcats[k];
        out << "subcategory " << k << " rounds " << sub.model.rounds() << " seed_negatives "
            << sub.report.seed_negative_rows;
        out << " harvests";
        if (sub.report.harvest_counts.empty()) out << " none";
        for (int h : sub.report.harvest_counts) out << " " << h;
        if (sub.report.stopped_zero_error) out << " stopped_zero_error";
        if (sub.report.stopped_half_error) out << " stopped_half_error";
        if (sub.report.harvest_empty_round) out << " harvest_empty_round";
        out << "\n";
        char buf[96];
        for (size_t t = 0; t < sub.report.rounds.size(); ++t) {
            std::snprintf(buf, sizeof(buf), "round %zu e %.6f z %.6f\n", t,
                          sub.report.rounds[t].error, sub.report.rounds[t].z);
            out << buf;
        }
    }
    return out.str();
}

int cmd_train(const PipelineConfig& config, const std::string& cls, int threads) {
    std::vector<std::string> names;
    if (cls.empty())
        for (const ClassConfig& c : config.classes) names.push_back(c.name);
    else
        names.push_back(cls);
    const std::vector<AnnotatedSample> annotations = load_annotations(config);
    ImageCache images;
    ensure_dir(config.paths.model_dir);
    ensure_dir(config.paths.output_dir);
    for (const std::string& name : names) {
        const ClassConfig& cc = class_config(config, name);
        const std::string lpath = layout_path(config, name);
        if (!fs::exists(lpath))
            throw DataError("missing layout " + lpath + "; run `tsdet cluster --class " + name +
                            "` first");
        const SubcategoryLayout layout = read_layout(lpath);
        const TrainingCorpus corpus = build_corpus(annotations, name);
        const TrainedClass trained =
            train_class(cc, corpus, layout, images, threads, config.seed);
        for (size_t k = 0; k < trained.subcats.size(); ++k) {
            const fs::path mpath =
                fs::path(config.paths.model_dir) / (name + "_" + std::to_string(k) + ".model");
            write_model(mpath.string(), trained.subcats[k].model);
        }
        const std::string report = training_report_text(trained);
        if (!config.paths.output_dir.empty()) {
            std::ofstream out(fs::path(config.paths.output_dir) / (name + ".train.txt"));
            out << report;
        }
        std::cout << report;
    }
    return 0;
}

int cmd_detect(const PipelineConfig& config, const std::string& list_path,
               const std::string& out_path, int threads) {
    const DetectorBank bank = load_bank(config);
    const ChannelBuilder builder = combo_builder(bank_combo(bank));
    std::vector<DetectionRecord> records;
    for (const std::string& path : read_list(list_path)) {
        const Image8 image = read_image(path);
        std::vector<Detection> dets = detect_all(image, bank, builder, threads);
        std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
            return a.calibrated_score > b.calibrated_score;
        });
        for (Detection& d : dets) records.push_back({stem_of(path), std::move(d)});
    }
    write_detections(out_path, records);
    std::cout << "detections " << records.size() << " -> " << out_path << "\n";
    return 0;
}

int cmd_eval(const PipelineConfig& config, const std::string& det_path,
             const std::string& report_path) {
    const std::vector<DetectionRecord> records = read_detections(det_path);
    const std::vector<AnnotatedSample> annotations = load_annotations(config);
    ensure_dir(config.paths.output_dir);
    std::ostringstream report;
    for (const ClassConfig& cc : config.classes) {
        std::map<std::string, std::vector<Detection>> dets_by_image;
        for (const DetectionRecord& r : records)
            if (r.det.class_name == cc.name) dets_by_image[r.image_id].push_back(r.det);
        std::map<std::string, std::vector<AnnotatedSample>> gts_by_image;
        int n_gt = 0;
        for (const AnnotatedSample& s : annotations)
            if (s.class_name == cc.name) {
                gts_by_image[stem_of(s.image_path)].push_back(s);
                if (s.difficulty <= cc.max_difficulty) ++n_gt;
            }
        MatchOptions options;
        options.min_overlap = cc.eval_overlap;
        options.protocol = cc.protocol;
        options.max_difficulty = cc.max_difficulty;
        options.uiuc_tolerance = cc.uiuc_tolerance;
        std::vector<std::pair<double, DetLabel>> labeled;
        for (auto& [image_id, dets] : dets_by_image) {
            std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
                return a.calibrated_score > b.calibrated_score;
            });
            static const std::vector<AnnotatedSample> kNone;
            const auto git = gts_by_image.find(image_id);
            const MatchResult res =
                match_detections(dets, git == gts_by_image.end() ? kNone : git->second, options);
            for (size_t i = 0; i < dets.size(); ++i)
                labeled.push_back({dets[i].calibrated_score, res.labels[i]});
        }
        char buf[256];
        if (n_gt == 0) {
            std::snprintf(buf, sizeof(buf), "class %s n_gt 0 skipped\n", cc.name.c_str());
            report << buf;
            continue;
        }
        const PRCurve curve = pr_curve(labeled, n_gt);
        const double ap = average_precision(curve);
        const double area = auc(curve);
        const double max_recall = curve.points.empty() ? 0.0 : curve.points.back().recall;
        std::snprintf(buf, sizeof(buf), "class %s n_gt %d ap %.6f auc %.6f max_recall %.6f\n",
                      cc.name.c_str(), n_gt, ap, area, max_recall);
        report << buf;
        if (!config.paths.output_dir.empty()) {
            std::ofstream pr(fs::path(config.paths.output_dir) / (cc.name + ".pr.txt"));
            for (const PRPoint& p : curve.points) {
                std::snprintf(buf, sizeof(buf), "%.6f %.6f\n", p.recall, p.precision);
                pr << buf;
            }
        }
    }
    std::cout << report.str();
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!out) throw DataError("cannot write " + report_path);
        out << report.str();
    }
    return 0;
}

int cmd_bench(const PipelineConfig& config, const std::string& list_path,
              const std::string& out_path, int threads) {
    std::vector<Image8> images;
    for (const std::string& path : read_list(list_path)) images.push_back(read_image(path));
    if (images.empty()) throw DataError("bench: empty image list");

    using clock = std::chrono::steady_clock;
    nlohmann::json rows = nlohmann::json::array();
    std::ostringstream table;
    table << "benchmark images " << images.size() << "\n";
    table << "stage name mean_ms\n";
    const FeatureCombo combos[] = {FeatureCombo::Acf, FeatureCombo::AcfLbp, FeatureCombo::AcfCov,
                                   FeatureCombo::All};
    char buf[160];
    for (FeatureCombo combo : combos) {
        const auto start = clock::now();
        for (const Image8& img : images) {
            const ChannelStack stack = build_channels(img, combo);
            (void)stack;
        }
        const double ms =
            std::chrono::duration<double, std::milli>(clock::now() - start).count() / images.size();
        std::snprintf(buf, sizeof(buf), "features %s %.3f\n", combo_name(combo).c_str(), ms);
        table << buf;
        rows.push_back({{"stage", "features"}, {"name", combo_name(combo)}, {"mean_ms", ms}});
    }

    bool have_models = true;
    DetectorBank bank;
    try {
        bank = load_bank(config);
    } catch (const std::exception&) {
        have_models = false;
    }
    if (have_models) {
        const FeatureCombo shared = bank_combo(bank);
        for (const ClassDetectors& cd : bank.classes) {
            DetectorBank single;
            single.classes.push_back(cd);
            const auto start = clock::now();
            for (const Image8& img : images)
                detect_all(img, single, combo_builder(shared), threads);
            const double ms =
                std::chrono::duration<double, std::milli>(clock::now() - start).count() /
                images.size();
            std::snprintf(buf, sizeof(buf), "detect %s %.3f\n", cd.name.c_str(), ms);
            table << buf;
            rows.push_back({{"stage", "detect"}, {"name", cd.name}, {"mean_ms", ms}});
        }
    }
    std::cout << table.str();
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw DataError("cannot write " + out_path);
        out << table.str();
        nlohmann::json doc;
        doc["images"] = images.size();
        doc["rows"] = rows;
        std::ofstream jout(out_path + ".json");
        jout << doc.dump(2) << "\n";
    }
    return 0;
}

int cmd_channels_dump(const std::string& image_path, const std::string& combo_name_arg,
                      const std::string& out_dir, bool pfm) {
    const Image8 image = read_image(image_path);
    const FeatureCombo combo = parse_combo(combo_name_arg);
    const ChannelStack stack = build_channels(image, combo);
    ensure_dir(out_dir);
    std::ofstream index(fs::path(out_dir) / "index.txt");
    index << "source " << image_path << "\n";
    index << "combo " << combo_name_arg << "\n";
    index << "grid " << stack.width << "x" << stack.height << " shrink " << stack.shrink << "\n";
    for (int c = 0; c < stack.channel_count(); ++c) {
        const std::string base = std::to_string(c) + "_" + stack.names[c];
        const std::string file = base + (pfm ? ".pfm" : ".pgm");
        if (pfm)
            write_pfm((fs::path(out_dir) / file).string(), stack.channels[c]);
        else
            write_pgm_normalized((fs::path(out_dir) / file).string(), stack.channels[c]);
        index << "channel " << c << " " << stack.names[c] << " " << file << "\n";
    }
    std::cout << "wrote " << stack.channel_count() << " channels to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-class sliding-window object detection toolkit"};
    app.require_subcommand(1);

    std::string config_path, cls, list_path, out_path, image_path, combo_arg = "acf";
    int threads = 1;
    uint64_t seed_override = 0;
    bool have_seed = false, pfm = false;

    const auto add_common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config)
            sub->add_option("--config", config_path, "pipeline config file")->required();
        sub->add_option("--threads", threads, "worker thread cap (1 = serial)");
        sub->add_option("--seed", seed_override, "override the config seed")
            ->each([&](const std::string&) { have_seed = true; });
    };

    CLI::App* cluster = app.add_subcommand("cluster", "cluster a class into subcategories");
    add_common(cluster, true);
    cluster->add_option("--class", cls, "class name")->required();

    CLI::App* train = app.add_subcommand("train", "train subcategory detectors");
    add_common(train, true);
    train->add_option("--class", cls, "single class (default: all)");

    CLI::App* detect = app.add_subcommand("detect", "run the detector bank over images");
    add_common(detect, true);
    detect->add_option("--images", list_path, "file listing image paths")->required();
    detect->add_option("--out", out_path, "detection output file")->required();

    CLI::App* eval = app.add_subcommand("eval", "score a detection file against ground truth");
    add_common(eval, true);
    eval->add_option("--detections", list_path, "detection file")->required();
    eval->add_option("--out", out_path, "report file");

    CLI::App* bench = app.add_subcommand("bench", "time feature extraction and detection");
    add_common(bench, true);
    bench->add_option("--images", list_path, "file listing image paths")->required();
    bench->add_option("--out", out_path, "table file (JSON twin gets .json)");

    CLI::App* dump = app.add_subcommand("channels-dump", "write each channel as an image");
    dump->add_option("--image", image_path, "input image")->required();
    dump->add_option("--combo", combo_arg, "feature combination");
    dump->add_option("--out", out_path, "output directory")->required();
    dump->add_flag("--pfm", pfm, "write float PFM instead of normalized PGM");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        PipelineConfig config;
        if (!config_path.empty()) {
            config = load_config(config_path);
            if (have_seed) config.seed = seed_override;
        }
        if (cluster->parsed()) return cmd_cluster(config, cls);
        if (train->parsed()) return cmd_train(config, cls, threads);
        if (detect->parsed()) return cmd_detect(config, list_path, out_path, threads);
        if (eval->parsed()) return cmd_eval(config, list_path, out_path);
        if (bench->parsed()) return cmd_bench(config, list_path, out_path, threads);
        if (dump->parsed()) return cmd_channels_dump(image_path, combo_arg, out_path, pfm);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const InvalidInput& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
