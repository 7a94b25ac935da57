#include "dfal/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "dfal/errors.hpp"
#include "dfal/seed.hpp"

namespace dfal {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

enum SeedStream : std::uint64_t {
  kNetwork = 0x6e6574,
  kConsumerShuffle = 0x636f6e,
  kTiming = 0x74696d,
};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
bool parse_number(const std::string& text, T& value) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  return ec == std::errc{} && ptr == end && !text.empty();
}

/// Typed lookups over the parsed tree. Problems are collected, not thrown,
/// so one ConfigError can name every bad field.
class ConfigReader {
 public:
  ConfigReader(const pt::ptree& tree, fs::path base_dir)
      : tree_(tree), base_dir_(std::move(base_dir)) {}

  std::optional<std::string> raw(const std::string& section, const std::string& key) {
    known_.insert(section + "." + key);
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto value = sec->get_optional<std::string>(key);
    if (!value) return std::nullopt;
    return trim(*value);
  }

  template <class T>
  void number(const std::string& section, const std::string& key, T& out) {
    const auto text = raw(section, key);
    if (!text) return;
    T value{};
    if (!parse_number(*text, value)) {
      fail(section, key, "expected a number, got '" + *text + "'");
      return;
    }
    out = value;
  }

  void flag(const std::string& section, const std::string& key, bool& out) {
    const auto text = raw(section, key);
    if (!text) return;
    if (*text == "true" || *text == "1" || *text == "yes") {
      out = true;
    } else if (*text == "false" || *text == "0" || *text == "no") {
      out = false;
    } else {
      fail(section, key, "expected true or false, got '" + *text + "'");
    }
  }

  void path(const std::string& section, const std::string& key, fs::path& out) {
    const auto text = raw(section, key);
    if (!text || text->empty()) return;
    const fs::path p(*text);
    out = p.is_absolute() ? p : base_dir_ / p;
  }

  void fail(const std::string& section, const std::string& key, const std::string& message) {
    errors_.push_back("[" + section + "] " + key + ": " + message);
  }

  void report_unknown() {
    for (const auto& [section, keys] : tree_) {
      if (keys.empty() && !keys.data().empty()) {
        errors_.push_back(section + ": key outside any section");
        continue;
      }
      for (const auto& [key, value] : keys)
        if (!known_.contains(section + "." + key)) fail(section, key, "unknown key");
    }
  }

  void add_error(std::string message) { errors_.push_back(std::move(message)); }

  void throw_if_failed() const { throw_errors(errors_); }

  static void throw_errors(const std::vector<std::string>& errors) {
    if (errors.empty()) return;
    std::string message;
    for (const auto& e : errors) message += (message.empty() ? "" : "; ") + e;
    throw ConfigError(message);
  }

 private:
  const pt::ptree& tree_;
  fs::path base_dir_;
  std::set<std::string> known_;
  std::vector<std::string> errors_;
};

void read_config(ConfigReader& r, ExperimentConfig& cfg) {
  if (const auto source = r.raw("data", "source")) {
    if (*source == "synthetic") {
      cfg.data.kind = DataSourceKind::synthetic;
    } else if (*source == "idx") {
      cfg.data.kind = DataSourceKind::idx;
    } else if (*source == "csv") {
      cfg.data.kind = DataSourceKind::csv;
    } else {
      r.fail("data", "source", "expected synthetic, idx or csv, got '" + *source + "'");
    }
  }
  r.number("data", "class_count", cfg.data.class_count);
  r.path("data", "train_images", cfg.data.train_images);
  r.path("data", "train_labels", cfg.data.train_labels);
  r.path("data", "test_images", cfg.data.test_images);
  r.path("data", "test_labels", cfg.data.test_labels);
  r.path("data", "train_csv", cfg.data.train_csv);
  r.path("data", "test_csv", cfg.data.test_csv);
  r.number("data", "test_fraction", cfg.data.test_fraction);
  r.number("data", "pool_cap", cfg.data.pool_cap);
  r.number("data", "split_seed", cfg.data.split_seed);

  auto& syn = cfg.data.synthetic;
  r.number("synthetic", "class_count", syn.class_count);
  r.number("synthetic", "points_per_class", syn.points_per_class);
  r.number("synthetic", "dimension", syn.dimension);
  r.number("synthetic", "center_radius", syn.center_radius);
  r.number("synthetic", "scale", syn.scale);
  r.number("synthetic", "seed", syn.seed);

  if (const auto arch = r.raw("network", "arch")) {
    try {
      cfg.arch = parse_arch(*arch);
    } catch (const Error& e) {
      r.fail("network", "arch", e.what());
    }
  }

  auto& ac = cfg.active;
  r.number("train", "learning_rate", ac.train.adam.learning_rate);
  r.number("train", "beta1", ac.train.adam.beta1);
  r.number("train", "beta2", ac.train.adam.beta2);
  r.number("train", "epsilon", ac.train.adam.epsilon);
  r.number("train", "batch_size", ac.train.batch_size);
  r.number("train", "base_steps", ac.train.base_steps);

  if (const auto norm = r.raw("attack", "norm")) {
    if (*norm == "2" || *norm == "l2") {
      ac.attack.p = NormOrder::l2;
    } else if (*norm == "inf" || *norm == "linf") {
      ac.attack.p = NormOrder::linf;
    } else {
      r.fail("attack", "norm", "expected 2 or inf, got '" + *norm + "'");
    }
  }
  r.number("attack", "overshoot", ac.attack.overshoot);
  r.number("attack", "max_iter", ac.attack.max_iter);
  r.flag("attack", "clip", ac.attack.clip);
  r.number("attack", "clip_min", ac.attack.clip_min);
  r.number("attack", "clip_max", ac.attack.clip_max);

  r.number("active", "candidates", ac.candidates);
  r.number("active", "n_query", ac.n_query);
  r.number("active", "budget", ac.budget);
  r.number("active", "initial_labeled", ac.initial_labeled);
  if (const auto exec = r.raw("active", "execution")) {
    if (*exec == "parallel") {
      ac.exec = Execution::parallel;
    } else if (*exec == "serial") {
      ac.exec = Execution::serial;
    } else {
      r.fail("active", "execution", "expected parallel or serial, got '" + *exec + "'");
    }
  }

  if (const auto list = r.raw("strategies", "list")) {
    cfg.strategies.clear();
    for (const auto& name : split(*list, ',')) {
      if (name.empty()) continue;
      try {
        cfg.strategies.push_back(parse_strategy(name));
      } catch (const Error& e) {
        r.fail("strategies", "list", e.what());
      }
    }
  }
  r.number("strategies", "ceal_delta", ac.params.ceal_delta);
  r.number("strategies", "bald_samples", ac.params.bald_samples);

  if (const auto seeds = r.raw("experiment", "seeds")) {
    cfg.seeds.clear();
    for (const auto& s : split(*seeds, ',')) {
      std::uint64_t v = 0;
      if (s.empty()) continue;
      if (!parse_number(s, v)) {
        r.fail("experiment", "seeds", "'" + s + "' is not a seed");
      } else {
        cfg.seeds.push_back(v);
      }
    }
  }
  r.path("experiment", "out", cfg.out_dir);
  if (const auto timings = r.raw("experiment", "timings")) {
    if (*timings == "measured") {
      cfg.timings = TimingColumns::measured;
    } else if (*timings == "zero") {
      cfg.timings = TimingColumns::zero;
    } else {
      r.fail("experiment", "timings", "expected measured or zero, got '" + *timings + "'");
    }
  }
  r.number("experiment", "timing_repetitions", cfg.timing_repetitions);
}

void require_file(std::vector<std::string>& errors, const std::string& field, const fs::path& p) {
  if (p.empty()) {
    errors.push_back("[data] " + field + ": required for this source");
  } else if (!fs::is_regular_file(p)) {
    errors.push_back("[data] " + field + ": file not found: " + p.string());
  }
}

std::string format_fixed(double v, int digits = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string format_general(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + path.string());
  return out;
}

ActiveConfig group_config(const ExperimentConfig& cfg, StrategyId strategy, std::uint64_t seed) {
  ActiveConfig ac = cfg.active;
  ac.strategy = strategy;
  ac.seed = seed;
  return ac;
}

}  // namespace

namespace {

std::vector<std::string> validation_errors(const ExperimentConfig& cfg) {
  std::vector<std::string> errors;
  auto check = [&errors](const std::string& field, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      errors.push_back(field + ": " + e.what());
    }
  };

  const DataSource& d = cfg.data;
  std::size_t class_count = d.class_count;
  switch (d.kind) {
    case DataSourceKind::synthetic:
      class_count = d.synthetic.class_count;
      check("[synthetic]", [&] { d.synthetic.validate(); });
      break;
    case DataSourceKind::idx:
      require_file(errors, "train_images", d.train_images);
      require_file(errors, "train_labels", d.train_labels);
      if (!d.test_images.empty() || !d.test_labels.empty()) {
        require_file(errors, "test_images", d.test_images);
        require_file(errors, "test_labels", d.test_labels);
      }
      break;
    case DataSourceKind::csv:
      require_file(errors, "train_csv", d.train_csv);
      if (!d.test_csv.empty()) require_file(errors, "test_csv", d.test_csv);
      break;
  }
  if (class_count < 2) errors.push_back("[data] class_count: must be at least 2");
  if (!(d.test_fraction > 0.0 && d.test_fraction < 1.0))
    errors.push_back("[data] test_fraction: must lie in (0, 1)");
  if (d.pool_cap != 0 && d.pool_cap < class_count)
    errors.push_back("[data] pool_cap: must be 0 or at least the class count");
  if (d.pool_cap != 0 && d.pool_cap < cfg.active.initial_labeled)
    errors.push_back("[data] pool_cap: smaller than [active] initial_labeled");

  if (cfg.strategies.empty()) errors.push_back("[strategies] list: must name at least one strategy");
  if (cfg.seeds.empty()) errors.push_back("[experiment] seeds: must list at least one seed");
  if (cfg.timing_repetitions < 5)
    errors.push_back("[experiment] timing_repetitions: must be at least 5");

  for (StrategyId s : cfg.strategies)
    check("[active]", [&] { group_config(cfg, s, 0).validate(class_count); });
  if (cfg.strategies.empty())
    check("[active]", [&] { cfg.active.validate(class_count); });
  std::sort(errors.begin(), errors.end());
  errors.erase(std::unique(errors.begin(), errors.end()), errors.end());
  return errors;
}

}  // namespace

void validate_experiment_config(const ExperimentConfig& cfg) {
  ConfigReader::throw_errors(validation_errors(cfg));
}

ExperimentConfig parse_experiment_config(std::istream& in, const fs::path& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message());
  }
  ExperimentConfig cfg;
  ConfigReader reader(tree, base_dir);
  read_config(reader, cfg);
  reader.report_unknown();
  for (auto& e : validation_errors(cfg)) reader.add_error(std::move(e));
  reader.throw_if_failed();
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_experiment_config(in, path.parent_path());
}

PreparedData prepare_data(const DataSource& source) {
  Dataset train, test;
  bool has_test = false;
  switch (source.kind) {
    case DataSourceKind::synthetic:
      train = gen_blobs(source.synthetic);
      break;
    case DataSourceKind::idx:
      train = load_idx(source.train_images, source.train_labels, source.class_count);
      if (!source.test_images.empty()) {
        test = load_idx(source.test_images, source.test_labels, source.class_count);
        has_test = true;
      }
      break;
    case DataSourceKind::csv:
      train = load_csv(source.train_csv, source.class_count);
      if (!source.test_csv.empty()) {
        test = load_csv(source.test_csv, source.class_count);
        has_test = true;
      }
      break;
  }
  train.validate();
  if (!has_test) {
    auto [tr, te] =
        split_and_subsample(train, source.test_fraction, source.pool_cap, source.split_seed);
    return {std::move(tr), std::move(te)};
  }
  test.validate();
  if (test.input_shape != train.input_shape)
    throw InvalidInput("test inputs have shape " + shape_string(test.input_shape) +
                       " but training inputs have " + shape_string(train.input_shape));
  auto [tr, te] = split_and_subsample(train, test, source.pool_cap, source.split_seed);
  return {std::move(tr), std::move(te)};
}

std::uint64_t network_seed(std::uint64_t run_seed) { return derive_seed(run_seed, {kNetwork}); }

NetworkFactory make_factory(Arch arch, const Dataset& data, std::uint64_t run_seed) {
  return [arch, shape = data.input_shape, classes = data.class_count, seed = network_seed(run_seed)] {
    return Network(make_arch(arch, shape, classes, seed));
  };
}

// ---------------------------------------------------------------------------
// Metrics table
// ---------------------------------------------------------------------------

void write_metrics_csv(const std::vector<MetricsRow>& rows, const fs::path& path) {
  auto out = open_output(path);
  out << kMetricsHeader << '\n';
  for (const auto& r : rows)
    out << r.strategy << ',' << r.seed << ',' << r.round << ',' << r.annotations << ','
        << r.labeled_data << ',' << format_fixed(r.test_accuracy) << ','
        << format_fixed(r.selection_seconds) << ',' << format_fixed(r.train_seconds) << ','
        << r.pseudo_corruptions << '\n';
  if (!out) throw InvalidInput("failed writing " + path.string());
}

std::vector<MetricsRow> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open metrics file " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != kMetricsHeader)
    throw FormatError("metrics header does not match '" + std::string(kMetricsHeader) + "'", 1);
  std::vector<MetricsRow> rows;
  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    MetricsRow r;
    const bool ok = f.size() == 9 && !f[0].empty() && parse_number(f[1], r.seed) &&
                    parse_number(f[2], r.round) && parse_number(f[3], r.annotations) &&
                    parse_number(f[4], r.labeled_data) && parse_number(f[5], r.test_accuracy) &&
                    parse_number(f[6], r.selection_seconds) &&
                    parse_number(f[7], r.train_seconds) && parse_number(f[8], r.pseudo_corruptions);
    if (!ok) throw FormatError("malformed metrics row " + std::to_string(row_number), row_number);
    if (!(r.test_accuracy >= 0.0 && r.test_accuracy <= 1.0))
      throw FormatError("accuracy outside [0, 1] on row " + std::to_string(row_number), row_number);
    r.strategy = f[0];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg, const PreparedData& data) {
  validate_experiment_config(cfg);
  std::vector<MetricsRow> rows;
  for (StrategyId strategy : cfg.strategies) {
    for (std::uint64_t seed : cfg.seeds) {
      const ActiveConfig ac = group_config(cfg, strategy, seed);
      const auto records = run_active_learning(ac, data.train, data.test,
                                               make_factory(cfg.arch, data.train, seed));
      const bool zero = cfg.timings == TimingColumns::zero;
      for (const auto& rec : records)
        rows.push_back({strategy_name(strategy), seed, rec.round, rec.annotations_used,
                        rec.training_set_size, rec.test_accuracy,
                        zero ? 0.0 : rec.selection_seconds, zero ? 0.0 : rec.train_seconds,
                        rec.pseudo_corruptions});
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

SummaryTable compare_metrics(const std::vector<MetricsRow>& rows,
                             const std::vector<std::size_t>& checkpoints, double target_accuracy) {
  SummaryTable table{checkpoints, target_accuracy, {}};
  std::vector<std::string> order;
  std::map<std::string, std::map<std::uint64_t, std::vector<const MetricsRow*>>> groups;
  for (const auto& r : rows) {
    if (!groups.contains(r.strategy)) order.push_back(r.strategy);
    groups[r.strategy][r.seed].push_back(&r);
  }
  for (const auto& name : order) {
    auto& by_seed = groups[name];
    for (auto& [seed, runs] : by_seed)
      std::ranges::sort(runs, {}, [](const MetricsRow* r) { return r->round; });

    StrategySummary s{name, by_seed.size(), {}, std::nullopt, std::nullopt};
    for (std::size_t c : checkpoints) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& [seed, runs] : by_seed) {
        const MetricsRow* best = nullptr;
        for (const MetricsRow* r : runs)
          if (r->annotations <= c) best = r;
        if (best) {
          sum += best->test_accuracy;
          ++n;
        }
      }
      s.checkpoint_accuracy.push_back(n ? std::optional<double>(sum / static_cast<double>(n))
                                        : std::nullopt);
    }

    std::map<std::size_t, std::vector<const MetricsRow*>> by_round;
    for (const auto& [seed, runs] : by_seed)
      for (const MetricsRow* r : runs) by_round[r->round].push_back(r);
    for (const auto& [round, members] : by_round) {
      double acc = 0.0, labeled = 0.0;
      std::size_t annotations = 0;
      for (const MetricsRow* r : members) {
        acc += r->test_accuracy;
        labeled += static_cast<double>(r->labeled_data);
        annotations = std::max(annotations, r->annotations);
      }
      const auto n = static_cast<double>(members.size());
      if (acc / n >= target_accuracy) {
        s.annotations_to_target = annotations;
        s.labeled_data_to_target = labeled / n;
        break;
      }
    }
    table.strategies.push_back(std::move(s));
  }
  return table;
}

void write_summary_csv(const SummaryTable& table, std::ostream& out) {
  out << "strategy,seeds";
  for (std::size_t c : table.checkpoints) out << ",acc@" << c;
  out << ",target_accuracy,annotations_to_target,labeled_data_to_target\n";
  for (const auto& s : table.strategies) {
    out << s.strategy << ',' << s.seeds;
    for (const auto& a : s.checkpoint_accuracy) out << ',' << (a ? format_fixed(*a) : "NA");
    out << ',' << format_general(table.target_accuracy) << ','
        << (s.annotations_to_target ? std::to_string(*s.annotations_to_target) : "NA") << ','
        << (s.labeled_data_to_target ? format_general(*s.labeled_data_to_target) : "NA") << '\n';
  }
}

// ---------------------------------------------------------------------------
// Transfer and timing studies
// ---------------------------------------------------------------------------

std::vector<TransferRow> run_transfer(const ExperimentConfig& cfg, const PreparedData& data,
                                      Arch selector, Arch consumer) {
  if (selector == consumer)
    throw InvalidInput("selector and consumer are both " + arch_name(selector) +
                       "; a transfer needs two different architectures");
  validate_experiment_config(cfg);
  std::vector<StrategyId> strategies = cfg.strategies;
  if (std::ranges::find(strategies, StrategyId::random) == strategies.end())
    strategies.push_back(StrategyId::random);

  std::vector<TransferRow> rows;
  for (StrategyId strategy : strategies) {
    for (std::uint64_t seed : cfg.seeds) {
      const ActiveConfig ac = group_config(cfg, strategy, seed);
      const NetworkFactory consumer_factory = make_factory(consumer, data.train, seed);
      std::vector<double> consumer_accuracy;
      const RoundObserver observer = [&](const PoolState&, std::span<const TrainingExample> examples,
                                         RoundRecord&) {
        const TrainConfig tc{ac.train.adam, ac.train.batch_size,
                             epochs_for_steps(ac.train.base_steps, ac.train.batch_size,
                                              examples.size()),
                             derive_seed(seed, {kConsumerShuffle})};
        const Network net = train(consumer_factory(), examples, tc);
        consumer_accuracy.push_back(accuracy(net, data.test, ac.exec));
      };
      const auto records = run_active_learning(ac, data.train, data.test,
                                               make_factory(selector, data.train, seed), observer);
      for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        rows.push_back({strategy_name(strategy), seed, rec.round, rec.annotations_used,
                        rec.training_set_size, rec.test_accuracy, consumer_accuracy.at(i)});
      }
    }
  }
  return rows;
}

void write_transfer_csv(const std::vector<TransferRow>& rows, const fs::path& path) {
  auto out = open_output(path);
  out << kTransferHeader << '\n';
  for (const auto& r : rows)
    out << r.strategy << ',' << r.seed << ',' << r.round << ',' << r.annotations << ','
        << r.labeled_data << ',' << format_fixed(r.selector_accuracy) << ','
        << format_fixed(r.consumer_accuracy) << '\n';
  if (!out) throw InvalidInput("failed writing " + path.string());
}

std::vector<TimingRow> run_timing(const ExperimentConfig& cfg, const PreparedData& data,
                                  const std::vector<std::size_t>& labeled_sizes) {
  validate_experiment_config(cfg);
  if (labeled_sizes.empty()) throw InvalidInput("no labeled-set sizes given");
  if (!std::ranges::is_sorted(labeled_sizes) ||
      std::ranges::adjacent_find(labeled_sizes) != labeled_sizes.end())
    throw InvalidInput("labeled-set sizes must be strictly ascending");
  if (labeled_sizes.back() + cfg.active.candidates > data.train.size())
    throw InvalidInput("largest labeled size plus K exceeds the pool of " +
                       std::to_string(data.train.size()));

  using Clock = std::chrono::steady_clock;
  const std::uint64_t seed = cfg.seeds.front();
  const std::array timed{StrategyId::dfal, StrategyId::coreset};
  std::vector<TimingRow> rows;
  std::vector<double> totals(timed.size() * labeled_sizes.size(), 0.0);

  for (std::size_t si = 0; si < labeled_sizes.size(); ++si) {
    const std::size_t size = labeled_sizes[si];
    const PoolState pools = init_pools(data.train, size, derive_seed(seed, {kTiming, size}));
    const auto examples = training_set(pools, data.train);
    const TrainConfig tc{cfg.active.train.adam, cfg.active.train.batch_size,
                         epochs_for_steps(cfg.active.train.base_steps,
                                          cfg.active.train.batch_size, examples.size()),
                         derive_seed(seed, {kTiming})};
    const Network net = train(make_factory(cfg.arch, data.train, seed)(), examples, tc);
    for (std::size_t rep = 0; rep < cfg.timing_repetitions; ++rep) {
      const std::uint64_t round_seed = derive_seed(seed, {kTiming, size, rep});
      for (std::size_t ti = 0; ti < timed.size(); ++ti) {
        const ActiveConfig ac = group_config(cfg, timed[ti], seed);
        const auto start = Clock::now();
        const QueryBatch batch =
            select_queries(ac, net, pools, data.train, ac.n_query, round_seed);
        totals[ti * labeled_sizes.size() + si] +=
            std::chrono::duration<double>(Clock::now() - start).count();
        if (batch.queried.size() != ac.n_query)
          throw InvariantViolation("timing selection returned a short batch");
      }
    }
  }
  for (std::size_t ti = 0; ti < timed.size(); ++ti)
    for (std::size_t si = 0; si < labeled_sizes.size(); ++si)
      rows.push_back({strategy_name(timed[ti]), labeled_sizes[si], cfg.timing_repetitions,
                      totals[ti * labeled_sizes.size() + si] /
                          static_cast<double>(cfg.timing_repetitions)});
  return rows;
}

void write_timing_csv(const std::vector<TimingRow>& rows, const fs::path& path) {
  auto out = open_output(path);
  out << kTimingHeader << '\n';
  for (const auto& r : rows)
    out << r.strategy << ',' << r.labeled_size << ',' << r.repetitions << ','
        << format_fixed(r.mean_selection_seconds, 9) << '\n';
  if (!out) throw InvalidInput("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fs::path cmd_run(const ExperimentConfig& cfg) {
  validate_experiment_config(cfg);
  const PreparedData data = prepare_data(cfg.data);
  const auto rows = run_experiment(cfg, data);
  const fs::path path = cfg.out_dir / "metrics.csv";
  write_metrics_csv(rows, path);
  return path;
}

SummaryTable cmd_compare(const fs::path& metrics_path, const std::vector<std::size_t>& checkpoints,
                         double target_accuracy) {
  if (!fs::is_regular_file(metrics_path))
    throw InvalidInput("metrics file not found: " + metrics_path.string());
  return compare_metrics(read_metrics_csv(metrics_path), checkpoints, target_accuracy);
}

fs::path cmd_transfer(const ExperimentConfig& cfg, Arch selector, Arch consumer) {
  if (selector == consumer)
    throw InvalidInput("selector and consumer are both " + arch_name(selector) +
                       "; a transfer needs two different architectures");
  validate_experiment_config(cfg);
  const PreparedData data = prepare_data(cfg.data);
  const auto rows = run_transfer(cfg, data, selector, consumer);
  const fs::path path = cfg.out_dir / "transfer.csv";
  write_transfer_csv(rows, path);
  return path;
}

fs::path cmd_timing(const ExperimentConfig& cfg, const std::vector<std::size_t>& labeled_sizes) {
  validate_experiment_config(cfg);
  const PreparedData data = prepare_data(cfg.data);
  const auto rows = run_timing(cfg, data, labeled_sizes);
  const fs::path path = cfg.out_dir / "timing.csv";
  write_timing_csv(rows, path);
  return path;
}

}  // namespace dfal
