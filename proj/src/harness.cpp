#include "freqdef/harness.hpp"

#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <thread>
#include <utility>

#include "freqdef/dataset.hpp"
#include "freqdef/fft.hpp"
#include "freqdef/image_io.hpp"
#include "freqdef/metrics.hpp"
#include "freqdef/spectra.hpp"

namespace fs = std::filesystem;

namespace freqdef {

namespace {

using nlohmann::json;

json parse_document(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

std::string require_string(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_string() ||
      doc[key].get<std::string>().empty())
    throw ConfigError(std::string("config needs a non-empty string field: ") +
                      key);
  return doc[key].get<std::string>();
}

std::string stem_of(const std::string& path) {
  return fs::path(path).stem().string();
}

std::string gt_path(const std::string& image_path) {
  fs::path p(image_path);
  return (p.parent_path() / (p.stem().string() + "_gt.pgm")).string();
}

std::string pert_path(const ExperimentConfig& cfg, const std::string& split,
                      const std::string& stem, const std::string& label) {
  return cfg.out_dir + "/perturbations/" + split + "/" + stem + "__" + label +
         ".pert";
}

std::string attacked_path(const ExperimentConfig& cfg, const std::string& split,
                          const std::string& stem, const std::string& label) {
  return cfg.out_dir + "/attacked/" + split + "/" + stem + "__" + label +
         ".ppm";
}

std::string filter_file(const ExperimentConfig& cfg, const std::string& label) {
  return cfg.out_dir + "/filters/G_" + label + ".wflt";
}

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

ImageTensor require_perturbation(const ExperimentConfig& cfg,
                                 const std::string& split,
                                 const std::string& stem,
                                 const std::string& label) {
  const std::string path = pert_path(cfg, split, stem, label);
  if (!fs::is_regular_file(path))
    throw ConfigError("missing perturbation " + path +
                      " (run attack before this step)");
  return load_perturbation(path);
}

// Filter files referenced by wiener defenses, compose chains included.
void collect_filter_paths(const DefenseSpec& spec,
                          std::vector<std::string>& out) {
  if (spec.kind == DefenseSpec::Kind::kWiener) out.push_back(spec.filter_path);
  for (const auto& child : spec.children) collect_filter_paths(child, out);
}

struct Split {
  std::string name;
  std::vector<std::string> images;
};

std::vector<Split> load_splits(const ExperimentConfig& cfg) {
  return {{"train", list_images(cfg.train_dir)},
          {"val", list_images(cfg.val_dir)}};
}

// Seed for one (split, image, attack) cell; only mopuri consumes it.
std::uint64_t cell_seed(std::uint64_t attack_root, const std::string& split,
                        const std::string& stem, const std::string& label) {
  return derive_seed(attack_root, split + "/" + stem + "__" + label);
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  const json doc = parse_document(json_text);
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  ExperimentConfig cfg;
  cfg.train_dir = require_string(doc, "train_dir");
  cfg.val_dir = require_string(doc, "val_dir");
  cfg.net_path = require_string(doc, "net");
  cfg.out_dir = doc.value("out_dir", std::string("out"));
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned())
      throw ConfigError("seed must be a non-negative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }

  std::set<std::string> labels;
  if (doc.contains("attacks")) {
    if (!doc["attacks"].is_array())
      throw ConfigError("attacks must be an array");
    for (std::size_t i = 0; i < doc["attacks"].size(); ++i) {
      AttackSpec spec;
      try {
        spec = parse_attack(doc["attacks"][i].dump());
      } catch (const Error& e) {
        throw ConfigError("attacks[" + std::to_string(i) + "]: " + e.what());
      }
      const std::string label = spec.effective_label();
      if (label == "none" || label == "combined")
        throw ConfigError("attack label is reserved: " + label);
      if (!labels.insert(label).second)
        throw ConfigError("duplicate attack label: " + label);
      cfg.attacks.push_back(std::move(spec));
    }
  }

  std::set<std::string> names;
  if (doc.contains("defenses")) {
    if (!doc["defenses"].is_array())
      throw ConfigError("defenses must be an array");
    for (std::size_t i = 0; i < doc["defenses"].size(); ++i) {
      DefenseSpec spec;
      try {
        spec = parse_defense(doc["defenses"][i].dump());
      } catch (const Error& e) {
        throw ConfigError("defenses[" + std::to_string(i) + "]: " + e.what());
      }
      if (spec.name == "none")
        throw ConfigError("defense name is reserved: none");
      if (!names.insert(spec.name).second)
        throw ConfigError("duplicate defense name: " + spec.name);
      cfg.defenses.push_back(std::move(spec));
    }
  }
  return cfg;
}

std::string config_to_json(const ExperimentConfig& config) {
  json doc;
  doc["train_dir"] = config.train_dir;
  doc["val_dir"] = config.val_dir;
  doc["net"] = config.net_path;
  doc["out_dir"] = config.out_dir;
  doc["seed"] = config.seed;
  doc["attacks"] = json::array();
  for (const auto& a : config.attacks)
    doc["attacks"].push_back(json::parse(attack_to_json(a)));
  doc["defenses"] = json::array();
  for (const auto& d : config.defenses)
    doc["defenses"].push_back(json::parse(defense_to_json(d)));
  return doc.dump(2);
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  ExperimentConfig cfg = parse_config(text);
  if (!fs::is_directory(cfg.train_dir))
    throw ConfigError("train_dir is not a directory: " + cfg.train_dir);
  if (!fs::is_directory(cfg.val_dir))
    throw ConfigError("val_dir is not a directory: " + cfg.val_dir);
  std::error_code ec;
  if (fs::equivalent(cfg.train_dir, cfg.val_dir, ec))
    throw ConfigError("train_dir and val_dir must be distinct");
  if (!fs::is_regular_file(cfg.net_path))
    throw ConfigError("net file not found: " + cfg.net_path);
  return cfg;
}

Denoiser make_denoiser(const DefenseSpec& spec) {
  validate(spec);
  switch (spec.kind) {
    case DefenseSpec::Kind::kIdentity:
      return [](const ImageTensor& x) { return x; };
    case DefenseSpec::Kind::kWiener: {
      if (!fs::is_regular_file(spec.filter_path))
        throw ConfigError("wiener filter file not found: " + spec.filter_path);
      auto filter = std::make_shared<WienerFilter>(load_filter(spec.filter_path));
      return [filter](const ImageTensor& x) { return apply_filter(*filter, x); };
    }
    case DefenseSpec::Kind::kJpegDct: {
      const int quality = spec.quality;
      return [quality](const ImageTensor& x) { return jpeg_dct(x, quality); };
    }
    case DefenseSpec::Kind::kMedianBlur: {
      const int kernel = spec.kernel;
      return [kernel](const ImageTensor& x) { return median_blur(x, kernel); };
    }
    case DefenseSpec::Kind::kBitDepth: {
      const int bits = spec.bits;
      return [bits](const ImageTensor& x) { return bit_depth_reduce(x, bits); };
    }
    case DefenseSpec::Kind::kNlMeans: {
      const int search = spec.search;
      const int patch = spec.patch;
      const double strength = spec.strength;
      return [search, patch, strength](const ImageTensor& x) {
        return nl_means(x, search, patch, strength);
      };
    }
    case DefenseSpec::Kind::kJpeg2000:
      throw SpecError("jpeg2000 defense is reserved but not implemented");
    case DefenseSpec::Kind::kCompose: {
      std::vector<Denoiser> chain;
      chain.reserve(spec.children.size());
      for (const auto& child : spec.children)
        chain.push_back(make_denoiser(child));
      return [chain](const ImageTensor& x) { return compose(chain, x); };
    }
  }
  throw SpecError("unhandled defense kind");
}

void parallel_for(Index count, int jobs,
                  const std::function<void(Index)>& fn) {
  if (count <= 0) return;
  const Index workers =
      std::min<Index>(count, std::max(jobs, 1));
  if (workers <= 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<Index> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (Index t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const Index i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
          next.store(count);  // drain remaining work
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

void cmd_gen_data(const std::string& out_dir, std::uint64_t seed) {
  fs::create_directories(out_dir);
  const std::uint64_t data_seed = derive_seed(seed, "data-gen");
  const std::string train = out_dir + "/train";
  const std::string val = out_dir + "/val";
  write_dataset(train, 32, 32, 32, 4, derive_seed(data_seed, "train"));
  write_dataset(val, 8, 32, 32, 4, derive_seed(data_seed, "val"));

  const MicroNet net = desk_net(derive_seed(seed, "net-init"), Interp::kNearest);
  const std::string net_path = out_dir + "/net.json";
  save_micronet(net_path, net);

  ExperimentConfig cfg;
  cfg.train_dir = train;
  cfg.val_dir = val;
  cfg.net_path = net_path;
  cfg.out_dir = out_dir;
  cfg.seed = seed;

  AttackSpec erase = AttackSpec::defaults(AttackKind::kMfgsm);
  erase.target_class = 1;
  AttackSpec swap = AttackSpec::defaults(AttackKind::kMetzenLlm);
  swap.target_class = 2;
  cfg.attacks = {erase, swap, AttackSpec::defaults(AttackKind::kIterativeMirror),
                 AttackSpec::defaults(AttackKind::kMopuri)};

  DefenseSpec wf_combined;
  wf_combined.kind = DefenseSpec::Kind::kWiener;
  wf_combined.name = "wiener_combined";
  wf_combined.filter_path = filter_file(cfg, "combined");

  DefenseSpec wf_mfgsm;
  wf_mfgsm.kind = DefenseSpec::Kind::kWiener;
  wf_mfgsm.name = "wiener_mfgsm";
  wf_mfgsm.filter_path = filter_file(cfg, "mfgsm");

  // The compose keeps a mild smoothing strength: it only mops up what the
  // filter leaves behind. The standalone denoiser needs a larger h to do
  // anything against +-epsilon perturbations on its own.
  DefenseSpec nlm;
  nlm.kind = DefenseSpec::Kind::kNlMeans;
  nlm.name = "nl_means";
  nlm.strength = 6.0;

  DefenseSpec wf_nlm;
  wf_nlm.kind = DefenseSpec::Kind::kCompose;
  wf_nlm.name = "wiener_nlm";
  wf_nlm.children = {wf_combined, nlm};
  wf_nlm.children[0].name.clear();
  wf_nlm.children[1].name.clear();
  wf_nlm.children[1].strength = 2.0;

  DefenseSpec median;
  median.kind = DefenseSpec::Kind::kMedianBlur;
  median.name = "median_blur";

  DefenseSpec jpeg;
  jpeg.kind = DefenseSpec::Kind::kJpegDct;
  jpeg.name = "jpeg_dct";
  jpeg.quality = 50;

  cfg.defenses = {wf_combined, wf_mfgsm, wf_nlm, nlm, median, jpeg};
  atomic_write(out_dir + "/config.json", config_to_json(cfg));
}

void cmd_attack(const ExperimentConfig& cfg, int jobs) {
  if (cfg.attacks.empty()) throw ConfigError("no attacks configured");
  const MicroNet net = load_micronet(cfg.net_path);
  const std::vector<Split> splits = load_splits(cfg);
  for (const auto& split : splits) {
    fs::create_directories(cfg.out_dir + "/perturbations/" + split.name);
    fs::create_directories(cfg.out_dir + "/attacked/" + split.name);
  }

  const std::uint64_t attack_root = derive_seed(cfg.seed, "attack-init");

  // Image-agnostic perturbations are drawn once and shared across images.
  std::vector<std::optional<ImageTensor>> shared(cfg.attacks.size());
  const ImageTensor probe = read_ppm(splits[0].images[0]);
  for (std::size_t a = 0; a < cfg.attacks.size(); ++a) {
    const AttackSpec& spec = cfg.attacks[a];
    if (spec.kind != AttackKind::kMopuri) continue;
    shared[a] = mopuri(net, probe.height(), probe.width(), probe.channels(),
                       spec, derive_seed(attack_root, spec.effective_label()))
                    .r;
  }

  struct Task {
    const Split* split;
    std::size_t image;
    std::size_t attack;
  };
  std::vector<Task> tasks;
  for (const auto& split : splits)
    for (std::size_t i = 0; i < split.images.size(); ++i)
      for (std::size_t a = 0; a < cfg.attacks.size(); ++a)
        tasks.push_back({&split, i, a});

  parallel_for(static_cast<Index>(tasks.size()), jobs, [&](Index t) {
    const Task& task = tasks[static_cast<std::size_t>(t)];
    const std::string& image_path = task.split->images[task.image];
    const AttackSpec& spec = cfg.attacks[task.attack];
    const std::string stem = stem_of(image_path);
    const std::string label = spec.effective_label();
    const ImageTensor x = read_ppm(image_path);
    const ImageTensor r =
        shared[task.attack]
            ? *shared[task.attack]
            : run_attack(net, x, spec,
                         cell_seed(attack_root, task.split->name, stem, label))
                  .r;
    save_perturbation(pert_path(cfg, task.split->name, stem, label), r);
    write_ppm(attacked_path(cfg, task.split->name, stem, label),
              clip(x + r, 0.0, 255.0));
  });
}

void cmd_fit_filter(const ExperimentConfig& cfg, int jobs) {
  if (cfg.attacks.empty()) throw ConfigError("no attacks configured");
  const std::vector<std::string> images = list_images(cfg.train_dir);
  fs::create_directories(cfg.out_dir + "/filters");

  std::vector<WienerFilter> singles(cfg.attacks.size());
  parallel_for(static_cast<Index>(cfg.attacks.size()), jobs, [&](Index a) {
    const AttackSpec& spec = cfg.attacks[static_cast<std::size_t>(a)];
    const std::string label = spec.effective_label();
    std::vector<TrainPair> pairs;
    pairs.reserve(images.size());
    for (const auto& path : images)
      pairs.push_back({read_ppm(path),
                       require_perturbation(cfg, "train", stem_of(path), label)});
    WienerFilter filter = filter_single_attack(
        pairs, std::string(attack_kind_name(spec.kind)), spec.epsilon);
    save_filter(filter_file(cfg, label), filter);
    singles[static_cast<std::size_t>(a)] = std::move(filter);
  });
  save_filter(filter_file(cfg, "combined"), combine_filters(singles));
}

void cmd_evaluate(const ExperimentConfig& cfg, int jobs) {
  std::vector<std::string> filter_paths;
  for (const auto& defense : cfg.defenses)
    collect_filter_paths(defense, filter_paths);
  for (const auto& path : filter_paths)
    if (!fs::is_regular_file(path))
      throw ConfigError("wiener filter file not found: " + path +
                        " (run fit-filter before evaluate)");

  const MicroNet net = load_micronet(cfg.net_path);
  std::vector<std::pair<std::string, Denoiser>> defenses;
  defenses.emplace_back("none", [](const ImageTensor& x) { return x; });
  for (const auto& spec : cfg.defenses)
    defenses.emplace_back(spec.name, make_denoiser(spec));

  const std::vector<Split> splits = load_splits(cfg);
  struct ImageJob {
    const Split* split;
    const std::string* path;
  };
  std::vector<ImageJob> work;
  for (const auto& split : splits)
    for (const auto& path : split.images) work.push_back({&split, &path});

  std::vector<std::string> blocks(work.size());
  parallel_for(static_cast<Index>(work.size()), jobs, [&](Index i) {
    const ImageJob& job = work[static_cast<std::size_t>(i)];
    const ImageTensor x = read_ppm(*job.path);
    const ClassMap gt = read_class_map(gt_path(*job.path));
    const std::string stem = stem_of(*job.path);

    // Two mIoU flavours: against ground truth, and against the prediction on
    // the untouched input (how much the processing changed the net's mind).
    const ClassMap ref = predict(net, x);
    std::string rows;
    auto emit = [&](const std::string& attack_name, const ImageTensor& x_adv) {
      for (const auto& [defense_name, denoise] : defenses) {
        const ImageTensor y = denoise(x_adv);
        const ClassMap pred = predict(net, y);
        rows += job.split->name + "," + stem + "," + attack_name + "," +
                defense_name + "," + fmt_g(mse(y, x)) + "," + fmt_g(ssim(y, x)) +
                "," + fmt_g(miou(pred, gt, net.num_classes()).mean) + "," +
                fmt_g(miou(pred, ref, net.num_classes()).mean) + "\n";
      }
    };
    emit("none", x);
    for (const auto& spec : cfg.attacks) {
      const ImageTensor r =
          require_perturbation(cfg, job.split->name, stem, spec.effective_label());
      emit(spec.effective_label(), clip(x + r, 0.0, 255.0));
    }
    blocks[static_cast<std::size_t>(i)] = std::move(rows);
  });

  std::string csv = "split,image_id,attack,defense,mse,ssim,miou,miou_ref\n";
  for (const auto& block : blocks) csv += block;
  atomic_write(cfg.out_dir + "/report.csv", csv);
}

void cmd_spectra(const ExperimentConfig& cfg, int jobs, bool sweep_modes) {
  if (cfg.attacks.empty()) throw ConfigError("no attacks configured");
  const std::string dir = cfg.out_dir + "/spectra";
  fs::create_directories(dir);
  const MicroNet base = load_micronet(cfg.net_path);
  const std::vector<std::string> images = list_images(cfg.train_dir);
  const std::uint64_t attack_root = derive_seed(cfg.seed, "attack-init");

  std::string csv = "attack,mode,scale,score\n";

  // One averaged spectrum per attack; regenerate on the fly when sweeping
  // modes, otherwise read what cmd_attack wrote.
  auto emit = [&](const MicroNet& net, const AttackSpec& spec,
                  bool from_files, const std::string& file_tag) {
    const std::string label = spec.effective_label();
    std::vector<ImageTensor> perts(images.size());
    if (from_files) {
      parallel_for(static_cast<Index>(images.size()), jobs, [&](Index i) {
        const auto idx = static_cast<std::size_t>(i);
        perts[idx] =
            require_perturbation(cfg, "train", stem_of(images[idx]), label);
      });
    } else if (spec.kind == AttackKind::kMopuri) {
      const ImageTensor probe = read_ppm(images[0]);
      const ImageTensor r =
          mopuri(net, probe.height(), probe.width(), probe.channels(), spec,
                 derive_seed(attack_root, label))
              .r;
      for (auto& p : perts) p = r;
    } else {
      parallel_for(static_cast<Index>(images.size()), jobs, [&](Index i) {
        const auto idx = static_cast<std::size_t>(i);
        const std::string stem = stem_of(images[idx]);
        perts[idx] = run_attack(net, read_ppm(images[idx]), spec,
                                cell_seed(attack_root, "train", stem, label))
                         .r;
      });
    }
    const ImageTensor avg = average_amplitude_spectrum(perts);
    const ImageTensor view = channel_mean(fftshift_log_magnitude(to_complex(avg)));
    const std::string suffix = file_tag.empty() ? "" : "__" + file_tag;
    write_pgm(dir + "/" + label + suffix + ".pgm", view);
    const std::string mode(interp_name(net.interpolation()));
    for (int scale : {2, 4})
      if (avg.height() % scale == 0 && avg.width() % scale == 0)
        csv += label + "," + mode + "," + std::to_string(scale) + "," +
               fmt_g(harmonic_peak_score(avg, scale)) + "\n";
  };

  if (sweep_modes) {
    for (Interp mode : {Interp::kNearest, Interp::kBilinear, Interp::kBicubic,
                        Interp::kArea}) {
      const MicroNet net(base.layers(), base.num_classes(), mode, base.seed());
      for (const auto& spec : cfg.attacks)
        emit(net, spec, false, std::string(interp_name(mode)));
    }
  } else {
    for (const auto& spec : cfg.attacks) emit(base, spec, true, "");
  }
  atomic_write(dir + "/scores.csv", csv);
}

}  // namespace freqdef
