#include "vbitn/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "vbitn/config.hpp"
#include "vbitn/data_synth.hpp"
#include "vbitn/distributions.hpp"
#include "vbitn/image_io.hpp"
#include "vbitn/metrics.hpp"
#include "vbitn/service.hpp"
#include "vbitn/trainer.hpp"
#include "vbitn/translation.hpp"

namespace vbitn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Failure reported as "error: <kind>: <message>".
struct CliError {
  int code;
  std::string kind;
  std::string message;
};

[[noreturn]] void usage_error(const std::string& message) { throw CliError{2, "usage", message}; }

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string ckpt;
  std::string target;
  std::string weights;
  std::size_t l = 4;
  std::size_t m = 4;
  std::string out;
  int port = 8080;
  std::string data;
  std::string input;
  std::optional<std::size_t> index;
  std::string resume;
  std::string host = "127.0.0.1";
  std::string static_dir;
  std::size_t n = 200;
  std::size_t train_count = 4096;
  std::size_t test_count = 512;
  std::string domains = "ink,paint";
};

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  return out;
}

/// Comma-separated decimals; accepted only if they already lie on the simplex
/// within 1e-6, then renormalised to sum to exactly 1.
std::vector<double> parse_weights(const std::string& text) {
  std::vector<double> w;
  for (const auto& part : split_commas(text)) {
    double v = 0;
    auto r = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || r.ec != std::errc() || r.ptr != part.data() + part.size()) {
      usage_error("--weights: '" + part + "' is not a decimal number");
    }
    w.push_back(v);
  }
  if (w.empty()) usage_error("--weights: empty list");
  try {
    check_simplex(w);
  } catch (const std::invalid_argument& e) {
    usage_error(std::string("--weights: ") + e.what());
  }
  double sum = 0;
  for (double v : w) sum += v;
  if (sum != 1.0)
    for (auto& v : w) v /= sum;
  return w;
}

std::uint64_t resolve_seed(const Flags& f, std::ostream& err) {
  if (f.seed) return *f.seed;
  std::random_device rd;
  const std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  err << "seed: " << seed << "\n";
  return seed;
}

fs::path data_root(const Flags& f, const TrainConfig& c) { return f.data.empty() ? fs::path(c.data_root) : fs::path(f.data); }

LoadedModel need_model(const Flags& f) {
  if (f.ckpt.empty()) usage_error("--ckpt is required");
  if (!fs::exists(f.ckpt)) throw CliError{1, "missing-checkpoint", "no checkpoint at " + f.ckpt};
  return load_checkpoint(f.ckpt);
}

struct Source {
  Image image;
  std::size_t index = 0;
  json description;
};

Source load_source(const Flags& f, const LoadedModel& model) {
  if (!f.input.empty()) {
    auto im = load_image(f.input);
    if (im.height != model.config.height || im.width != model.config.width) {
      throw CliError{1, "image", f.input + " is " + std::to_string(im.height) + "x" +
                                     std::to_string(im.width) + ", model expects " +
                                     std::to_string(model.config.height) + "x" +
                                     std::to_string(model.config.width)};
    }
    return {im, 0, {{"input", f.input}}};
  }
  const std::size_t index = f.index.value_or(0);
  const auto root = data_root(f, model.config);
  const auto path = image_path(root, model.config.domains.front(), "test", index);
  if (!fs::exists(path)) {
    throw CliError{1, "missing-data", "no source image " + path.string() + " (run gen-data or pass --input)"};
  }
  return {load_image(path), index, {{"dataset", root.string()}, {"split", "test"}, {"index", index}}};
}

json latents_json(const LatentPair& p) {
  return {{"y", p.y}, {"z", p.z}, {"y_source", p.y_source}, {"z_source", p.z_source}};
}

std::string pad3(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", i);
  return buf;
}

/// Writes one PNG per result plus provenance.json; returns the directory.
fs::path write_results(const fs::path& dir, const std::vector<Translation>& results, json provenance,
                       std::ostream& out) {
  fs::create_directories(dir);
  json outputs = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto name = pad3(i) + ".png";
    save_image(dir / name, to_image(results[i].image));
    outputs.push_back({{"file", name}, {"latents", latents_json(results[i].latents)}});
  }
  provenance["outputs"] = outputs;
  std::ofstream(dir / "provenance.json") << provenance.dump(2) << "\n";
  out << dir.string() << "\n";
  return dir;
}

fs::path output_dir(const Flags& f, const std::string& grid_name) {
  return f.out.empty() ? fs::path("out") / grid_name : fs::path(f.out);
}

TrainConfig config_for(const Flags& f) {
  if (f.config.empty()) usage_error("--config is required");
  if (!fs::exists(f.config)) throw CliError{1, "missing-config", "no config at " + f.config};
  try {
    auto c = TrainConfig::load(f.config);
    if (f.seed) c.seed = *f.seed;
    return c;
  } catch (const ConfigError& e) {
    throw CliError{1, "config", e.what()};
  }
}

std::vector<ImageBatch> load_sets(const fs::path& root, const TrainConfig& c, const std::string& split) {
  std::vector<ImageBatch> sets;
  for (const auto& d : c.domains) {
    try {
      sets.push_back(load_split(root, d, split));
    } catch (const std::runtime_error& e) {
      throw CliError{1, "missing-data", std::string(e.what()) + " (run gen-data first)"};
    }
  }
  return sets;
}

int cmd_gen_data(const Flags& f, std::ostream& out, std::ostream& err) {
  DatasetLayout layout;
  if (!f.config.empty()) {
    auto c = config_for(f);
    layout.domains = c.domains;
    layout.train = c.train_count;
    layout.test = c.test_count;
    layout.seed = f.seed ? *f.seed : c.data_seed;
    layout.height = c.height;
    layout.width = c.width;
  } else {
    layout.domains = split_commas(f.domains);
    layout.train = f.train_count;
    layout.test = f.test_count;
    layout.seed = resolve_seed(f, err);
  }
  for (const auto& d : layout.domains) {
    const auto& known = known_style_domains();
    if (std::find(known.begin(), known.end(), d) == known.end()) {
      usage_error("unknown domain '" + d + "' (known: ink, paint, neon)");
    }
  }
  const fs::path root = f.out.empty() ? fs::path("data") : fs::path(f.out);
  write_dataset(root, layout);
  out << root.string() << "\n";
  return 0;
}

int cmd_train(const Flags& f, std::ostream& out, std::ostream& err) {
  std::optional<Trainer> trainer;
  if (!f.resume.empty()) {
    if (!fs::exists(f.resume)) throw CliError{1, "missing-checkpoint", "no checkpoint at " + f.resume};
    auto data = read_checkpoint_file(f.resume);
    auto c = TrainConfig::parse(data.config_text);
    trainer.emplace(Trainer::resume(f.resume, load_sets(data_root(f, c), c, "train")));
  } else {
    auto c = config_for(f);
    if (!f.seed) {
      err << "seed: " << c.seed << " (from config)\n";
    }
    trainer.emplace(c, load_sets(data_root(f, c), c, "train"));
  }
  RunOptions opts;
  auto result = run_training(*trainer, opts);
  std::ifstream in(result.last_checkpoint, std::ios::binary);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  out << result.last_checkpoint.string() << " " << content_hash(bytes) << "\n";
  return 0;
}

int cmd_translate(const std::string& which, const Flags& f, std::ostream& out, std::ostream& err) {
  auto model = need_model(f);
  const auto src = load_source(f, model);
  const std::uint64_t seed = resolve_seed(f, err);
  const auto& bundle = model.bundle;
  if (which != "mix") {
    if (f.target.empty()) usage_error("--target is required");
    try {
      if (bundle.domain_index(f.target) == 0) usage_error("--target '" + f.target + "' is the source domain");
    } catch (const std::out_of_range&) {
      usage_error("--target: unknown domain '" + f.target + "'");
    }
  }
  auto q = encode_source(bundle, to_tensor(src.image));
  Rng rng = request_rng(seed);
  json prov{{"command", which}, {"seed", seed}, {"checkpoint", model.hash}, {"source", src.description}};
  std::vector<Translation> results;
  std::string grid;
  const SourceRef ref{src.index};
  if (which == "translate") {
    results.push_back(translate(bundle, q, f.target, rng, ref));
    prov["target"] = f.target;
    grid = "translate-" + f.target + "-s" + std::to_string(seed);
  } else if (which == "edit-style") {
    if (f.l == 0) usage_error("--l must be >= 1");
    results = edit_styles(bundle, q, f.target, f.l, rng, ref);
    prov["target"] = f.target;
    prov["l"] = f.l;
    grid = "edit-style-" + f.target + "-l" + std::to_string(f.l) + "-s" + std::to_string(seed);
  } else if (which == "edit-content") {
    if (f.m == 0) usage_error("--m must be >= 1");
    results = edit_contents(bundle, q, f.target, f.m, rng, ref);
    prov["target"] = f.target;
    prov["m"] = f.m;
    grid = "edit-content-" + f.target + "-m" + std::to_string(f.m) + "-s" + std::to_string(seed);
  } else {
    if (f.weights.empty()) usage_error("--weights is required");
    auto w = parse_weights(f.weights);
    if (w.size() != bundle.num_targets()) {
      usage_error("--weights needs " + std::to_string(bundle.num_targets()) + " entries (one per target)");
    }
    auto m = mixed_translate(bundle, q, w, rng, ref);
    results.push_back(m.result);
    prov["weights"] = w;
    prov["chosen_decoder"] = bundle.domains[m.chosen_decoder].id;
    prov["component"] = bundle.domains[m.component].id;
    grid = "mix-s" + std::to_string(seed);
  }
  write_results(output_dir(f, grid), results, prov, out);
  return 0;
}

int cmd_eval(const Flags& f, std::ostream& out, std::ostream& err) {
  auto model = need_model(f);
  const std::uint64_t seed = resolve_seed(f, err);
  const auto& c = model.config;
  const auto root = data_root(f, c);
  auto train = load_sets(root, c, "train");
  auto test = load_sets(root, c, "test");
  std::vector<ImageBatch> calib;
  for (const auto& t : train) calib.push_back(t.head(512));
  DomainClassifier classifier;
  classifier.fit(calib);
  MaskExtractor extractor;
  extractor.calibrate(calib);
  json checks;
  for (std::size_t d = 0; d < test.size(); ++d) {
    checks["classifier_accuracy"][c.domains[d]] = classifier.accuracy(test[d], c.domains[d]);
    checks["extractor_iou"][c.domains[d]] = extractor.mean_iou(test[d]);
  }
  const auto neg = heldout_neg_elbo(model.bundle, test, c.mc_samples, c.sigma_x, seed);
  double elbo_mean = 0;
  for (double v : neg) elbo_mean -= v / static_cast<double>(neg.size());
  std::ofstream log;
  const auto dir = run_directory(c);
  if (fs::exists(dir)) log.open(dir / "log.ndjson", std::ios::app);
  for (std::size_t t = 1; t < c.domains.size(); ++t) {
    auto report = evaluate_translation(model.bundle, test[0], c.domains[t], classifier, extractor, seed, f.n);
    report.elbo_test = elbo_mean;
    out << report.to_text();
    if (log) log << report.to_json() << "\n";
  }
  out << "calibration      " << checks.dump() << "\n";
  return 0;
}

int cmd_serve(const Flags& f, std::ostream& out, std::ostream&) {
  auto model = need_model(f);
  std::optional<ImageBatch> dataset;
  const auto root = data_root(f, model.config);
  if (fs::exists(root / model.config.domains.front() / "test")) {
    dataset = load_split(root, model.config.domains.front(), "test");
  }
  ServiceOptions opts;
  if (!f.static_dir.empty()) opts.static_dir = f.static_dir;
  Service service(std::move(model), std::move(dataset), opts);
  out << "serving checkpoint " << service.checkpoint_id() << " on http://" << f.host << ":" << f.port << "\n"
      << std::flush;
  if (!service.listen(f.host, f.port)) {
    throw CliError{1, "bind", "cannot listen on " + f.host + ":" + std::to_string(f.port)};
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variational Bayesian image translation", "vbitn"};
  app.require_subcommand(1);
  Flags f;
  std::uint64_t seed_value = 0;

  auto add_seed = [&](CLI::App* c) {
    c->add_option("--seed", seed_value, "random seed (u64); omitted = fresh entropy, printed");
  };
  auto add_model = [&](CLI::App* c) {
    c->add_option("--ckpt", f.ckpt, "checkpoint file")->required();
    c->add_option("--data", f.data, "dataset root (default: from checkpoint config)");
  };
  auto add_source = [&](CLI::App* c) {
    c->add_option("--input", f.input, "source PNG");
    c->add_option("--index", f.index, "source test-split index (default 0)");
    c->add_option("--out", f.out, "output directory");
  };

  auto* gen = app.add_subcommand("gen-data", "render the synthetic corpus");
  gen->add_option("--config", f.config, "take domains, counts and seed from a config");
  gen->add_option("--out", f.out, "dataset root (default data)");
  gen->add_option("--domains", f.domains, "comma-separated domain ids, source first");
  gen->add_option("--train", f.train_count, "training images per domain");
  gen->add_option("--test", f.test_count, "test images per domain");
  add_seed(gen);

  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", f.config, "config file");
  train->add_option("--data", f.data, "dataset root (overrides config)");
  train->add_option("--resume", f.resume, "continue from a checkpoint");
  add_seed(train);

  auto* tr = app.add_subcommand("translate", "translate one image");
  add_model(tr);
  add_source(tr);
  tr->add_option("--target", f.target, "target domain id")->required();
  add_seed(tr);

  auto* es = app.add_subcommand("edit-style", "l style samples, one shared content");
  add_model(es);
  add_source(es);
  es->add_option("--target", f.target, "target domain id")->required();
  es->add_option("--l", f.l, "number of style samples");
  add_seed(es);

  auto* ec = app.add_subcommand("edit-content", "m content samples, one shared style");
  add_model(ec);
  add_source(ec);
  ec->add_option("--target", f.target, "target domain id")->required();
  ec->add_option("--m", f.m, "number of content samples");
  add_seed(ec);

  auto* mix = app.add_subcommand("mix", "mixed-domain translation");
  add_model(mix);
  add_source(mix);
  mix->add_option("--weights", f.weights, "comma-separated weights over targets")->required();
  add_seed(mix);

  auto* ev = app.add_subcommand("eval", "score a checkpoint");
  add_model(ev);
  ev->add_option("--n", f.n, "held-out source images to translate");
  add_seed(ev);

  auto* serve = app.add_subcommand("serve", "run the HTTP API");
  add_model(serve);
  serve->add_option("--port", f.port, "TCP port");
  serve->add_option("--host", f.host, "bind address");
  serve->add_option("--static", f.static_dir, "directory served at /");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    for (auto* sub : app.get_subcommands()) {
      if (sub->count("--seed") > 0) f.seed = seed_value;
      const auto name = sub->get_name();
      if (name == "gen-data") return cmd_gen_data(f, out, err);
      if (name == "train") return cmd_train(f, out, err);
      if (name == "translate" || name == "edit-style" || name == "edit-content" || name == "mix") {
        return cmd_translate(name, f, out, err);
      }
      if (name == "eval") return cmd_eval(f, out, err);
      if (name == "serve") return cmd_serve(f, out, err);
    }
    usage_error("no command given");
  } catch (const CliError& e) {
    err << "error: " << e.kind << ": " << one_line(e.message) << "\n";
    return e.code;
  } catch (const ConfigError& e) {
    err << "error: config: " << one_line(e.what()) << "\n";
    return 1;
  } catch (const FormatError& e) {
    err << "error: checkpoint: " << one_line(e.what()) << "\n";
    return 1;
  } catch (const ImageError& e) {
    err << "error: image: " << one_line(e.what()) << "\n";
    return 1;
  } catch (const NonFiniteError& e) {
    err << "error: non-finite: " << one_line(e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: runtime: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}

}  // namespace vbitn
