#include "vbitn/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace vbitn {

namespace pt = boost::property_tree;

namespace {

std::string shortest(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename C>
std::string join(const C& items) {
  std::ostringstream os;
  bool first = true;
  for (const auto& x : items) {
    if (!first) os << ',';
    os << x;
    first = false;
  }
  return os.str();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    auto b = cur.find_first_not_of(" \t");
    auto e = cur.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : cur.substr(b, e - b + 1));
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto r = std::from_chars(first, last, v);
  if (r.ec != std::errc() || r.ptr != last) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "' as a number");
  }
  return v;
}

}  // namespace

void TrainConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  need(batch_size >= 1, "train.batch_size must be >= 1");
  need(std::isfinite(learning_rate) && learning_rate >= 0, "train.learning_rate must be >= 0");
  need(beta1 >= 0 && beta1 < 1, "train.beta1 must lie in [0, 1)");
  need(beta2 >= 0 && beta2 < 1, "train.beta2 must lie in [0, 1)");
  need(adam_eps > 0, "train.adam_eps must be > 0");
  try {
    weights.validate();
  } catch (const std::invalid_argument&) {
    throw ConfigError("invalid config: train.gamma_* must be finite and >= 0");
  }
  need(mc_samples >= 1, "train.mc_samples must be >= 1");
  need(sigma_x > 0 && std::isfinite(sigma_x), "train.sigma_x must be > 0");
  need(disc_steps >= 1, "train.disc_steps must be >= 1");
  need(!run_id.empty() && run_id.find('/') == std::string::npos, "train.run_id must be a plain name");
  need(separation > 0, "model.separation must be > 0");
  need(domains.size() >= 2, "data.domains needs a source and at least one target");
  need(domains.size() <= style_dim, "model.style_dim must be >= number of domains");
  need(std::set<std::string>(domains.begin(), domains.end()).size() == domains.size(),
       "data.domains must not repeat");
  try {
    net().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

NetConfig TrainConfig::net() const {
  NetConfig n;
  n.height = height;
  n.width = width;
  n.widths = widths;
  n.style_dim = style_dim;
  n.content_dim = content_dim;
  return n;
}

std::string TrainConfig::to_ini() const {
  std::ostringstream os;
  os << "[train]\n"
     << "epochs = " << epochs << "\n"
     << "batch_size = " << batch_size << "\n"
     << "max_steps = " << max_steps << "\n"
     << "learning_rate = " << shortest(learning_rate) << "\n"
     << "beta1 = " << shortest(beta1) << "\n"
     << "beta2 = " << shortest(beta2) << "\n"
     << "adam_eps = " << shortest(adam_eps) << "\n"
     << "gamma_ind = " << shortest(weights.ind) << "\n"
     << "gamma_rec = " << shortest(weights.rec) << "\n"
     << "gamma_adv = " << shortest(weights.adv) << "\n"
     << "mc_samples = " << mc_samples << "\n"
     << "sigma_x = " << shortest(sigma_x) << "\n"
     << "seed = " << seed << "\n"
     << "disc_steps = " << disc_steps << "\n"
     << "checkpoint_every = " << checkpoint_every << "\n"
     << "run_id = " << run_id << "\n"
     << "\n[model]\n"
     << "style_dim = " << style_dim << "\n"
     << "content_dim = " << content_dim << "\n"
     << "separation = " << shortest(separation) << "\n"
     << "widths = " << join(widths) << "\n"
     << "height = " << height << "\n"
     << "width = " << width << "\n"
     << "\n[data]\n"
     << "root = " << data_root << "\n"
     << "domains = " << join(domains) << "\n"
     << "train_count = " << train_count << "\n"
     << "test_count = " << test_count << "\n"
     << "seed = " << data_seed << "\n";
  return os.str();
}

TrainConfig TrainConfig::parse(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  TrainConfig c;
  std::set<std::string> seen;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("config key '" + section + "' must live inside a [section]");
    }
    for (const auto& [key, node] : body) {
      const std::string name = section + "." + key;
      const std::string v = node.get_value<std::string>();
      seen.insert(name);
      auto u = [&] { return parse_number<std::size_t>(name, v); };
      auto u64 = [&] { return parse_number<std::uint64_t>(name, v); };
      auto d = [&] { return parse_number<double>(name, v); };
      if (name == "train.epochs") c.epochs = u();
      else if (name == "train.batch_size") c.batch_size = u();
      else if (name == "train.max_steps") c.max_steps = u();
      else if (name == "train.learning_rate") c.learning_rate = d();
      else if (name == "train.beta1") c.beta1 = d();
      else if (name == "train.beta2") c.beta2 = d();
      else if (name == "train.adam_eps") c.adam_eps = d();
      else if (name == "train.gamma_ind") c.weights.ind = d();
      else if (name == "train.gamma_rec") c.weights.rec = d();
      else if (name == "train.gamma_adv") c.weights.adv = d();
      else if (name == "train.mc_samples") c.mc_samples = u();
      else if (name == "train.sigma_x") c.sigma_x = d();
      else if (name == "train.seed") c.seed = u64();
      else if (name == "train.disc_steps") c.disc_steps = u();
      else if (name == "train.checkpoint_every") c.checkpoint_every = u();
      else if (name == "train.run_id") c.run_id = v;
      else if (name == "model.style_dim") c.style_dim = u();
      else if (name == "model.content_dim") c.content_dim = u();
      else if (name == "model.separation") c.separation = d();
      else if (name == "model.widths") {
        c.widths.clear();
        for (const auto& w : split_list(v)) c.widths.push_back(parse_number<std::size_t>(name, w));
      } else if (name == "model.height") c.height = u();
      else if (name == "model.width") c.width = u();
      else if (name == "data.root") c.data_root = v;
      else if (name == "data.domains") c.domains = split_list(v);
      else if (name == "data.train_count") c.train_count = u();
      else if (name == "data.test_count") c.test_count = u();
      else if (name == "data.seed") c.data_seed = u64();
      else throw ConfigError("unknown config key '" + name + "'");
    }
  }
  c.validate();
  return c;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  return parse(read_text_file(path));
}

}  // namespace vbitn
