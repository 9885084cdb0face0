#include "confspec/confspec.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

using namespace confspec;

namespace {

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("confspec_io_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

OperatorMatrix sample_dirac() {
  Grid g(2, 4);
  auto v = sample_on(g, [](std::array<double, 2> x) { return 0.3 * std::sin(x[0]) * std::cos(x[1]) + 1.0 / 3.0; });
  return build_dirac(make_torus_metric(1.7, v, 1), SpinStructure::torus(Boundary::periodic, Boundary::antiperiodic));
}

}  // namespace

TEST(Hash, MatchesGitBlobIds) {
  // `git hash-object` on the same bytes.
  EXPECT_EQ(git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(git_blob_hash("hello\n"), git_blob_hash("hello\n"));
  EXPECT_NE(git_blob_hash("hello\n"), git_blob_hash("hello"));
}

TEST(MetricFile, RoundTripIsBitIdentical) {
  std::mt19937_64 rng(91);
  std::normal_distribution<double> normal;
  RealVector noise(64);
  for (auto& x : noise) x = normal(rng);
  for (const auto& m : {make_circle_metric(3.3, noise, 5), make_torus_metric(2.0, noise, 2)}) {
    const auto path = scratch_dir("metric") / "m.json";
    save_metric(path.string(), m);
    const Metric back = load_metric(path.string());
    EXPECT_TRUE(back.grid() == m.grid());
    EXPECT_EQ(back.band_limit(), m.band_limit());
    EXPECT_EQ(back.background().kind, m.background().kind);
    EXPECT_EQ(back.background().length, m.background().length);
    EXPECT_EQ(back.background().modulus, m.background().modulus);
    for (Eigen::Index i = 0; i < m.v_samples().size(); ++i) EXPECT_EQ(back.v_samples()(i), m.v_samples()(i)) << i;
  }
}

TEST(MetricFile, ErrorsNameTheField) {
  auto good = metric_to_json(make_circle_metric(two_pi, RealVector::Zero(8), 0));
  auto missing = good;
  missing.erase("v_samples");
  EXPECT_EQ(message_of([&] { metric_from_json(missing); }), "metric.v_samples: missing");
  auto wrong = good;
  wrong["N"] = "eight";
  EXPECT_EQ(message_of([&] { metric_from_json(wrong); }), "metric.N: wrong type");
  auto short_samples = good;
  short_samples["v_samples"] = {0.0, 0.0};
  EXPECT_EQ(message_of([&] { metric_from_json(short_samples); }), "metric.v_samples: expected 8 values, got 2");
  auto bad_bg = good;
  bad_bg["background"] = {{"kind", "sphere"}};
  EXPECT_EQ(message_of([&] { metric_from_json(bad_bg); }), "metric.background.kind: unknown background 'sphere'");
  EXPECT_NE(message_of([&] { load_metric("/nonexistent/m.json"); }).find("cannot open"), std::string::npos);
}

TEST(OperatorDump, BinaryAndTextRoundTrips) {
  const auto d = sample_dirac();
  for (auto enc : {Encoding::binary, Encoding::text}) {
    std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
    write_operator(buf, d, enc);
    const auto back = read_operator(buf);
    EXPECT_TRUE(back.grid == d.grid);
    EXPECT_EQ(back.rank, d.rank);
    EXPECT_EQ(back.hermitian, d.hermitian);
    EXPECT_EQ(back.spin.flags, d.spin.flags);
    ASSERT_EQ(back.matrix.size(), d.matrix.size());
    EXPECT_EQ((back.matrix - d.matrix).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_FALSE(back.structure.has_value());
  }
  const auto path = scratch_dir("op") / "d.dump";
  save_operator(path.string(), d);
  EXPECT_EQ((load_operator(path.string()).matrix - d.matrix).cwiseAbs().maxCoeff(), 0.0);
}

TEST(OperatorDump, HeaderIsReadable) {
  std::ostringstream out;
  write_operator(out, sample_dirac(), Encoding::text);
  const std::string first = out.str().substr(0, out.str().find('\n'));
  EXPECT_EQ(first,
            "# confspec-operator {\"N\":4,\"dim\":2,\"period\":6.283185307179586,\"rank\":2,\"basis\":\"fourier\","
            "\"spin\":[\"periodic\",\"antiperiodic\"],\"hermitian\":true,\"encoding\":\"text\"}");
}

TEST(OperatorDump, ErrorsNameTheLine) {
  std::ostringstream out;
  write_operator(out, build_dirac(make_circle_metric(two_pi, RealVector::Zero(2), 0), SpinStructure::circle(Boundary::antiperiodic)),
                 Encoding::text);
  std::string text = out.str();

  std::istringstream no_header("hello\n");
  EXPECT_EQ(message_of([&] { read_operator(no_header); }), "operator dump line 1: missing '# confspec-operator' header");

  std::string garbled = text;
  garbled.replace(garbled.find('\n') + 1, 1, "x");
  std::istringstream bad(garbled);
  EXPECT_EQ(message_of([&] { read_operator(bad); }), "operator dump line 2: expected 're im'");

  std::istringstream cut(text.substr(0, text.rfind('\n', text.size() - 2) + 1));
  EXPECT_EQ(message_of([&] { read_operator(cut); }), "operator dump line 5: missing entry");

  std::string bad_basis = text;
  bad_basis.replace(bad_basis.find("fourier"), 7, "sites");
  std::istringstream basis(bad_basis);
  EXPECT_EQ(message_of([&] { read_operator(basis); }), "operator header.basis: only 'fourier' is supported");

  std::ostringstream bin;
  write_operator(bin, sample_dirac(), Encoding::binary);
  std::istringstream truncated(bin.str().substr(0, bin.str().size() - 8));
  EXPECT_EQ(message_of([&] { read_operator(truncated); }), "operator dump: truncated binary payload");
}

TEST(Csv, FixedHeaderAndRows) {
  std::ostringstream out;
  write_report_csv(out, {{3, 1, -1, 8, 0.25}});
  EXPECT_EQ(out.str(), "point_index,dir_x,dir_y,frequency,residual\n3,1,-1,8,0.25\n");
}

TEST(Config, ParsesInlineMetric) {
  const auto cfg = parse_config(R"({"kind": "recover", "N": 32,
    "metric": {"background": {"kind": "circle", "length": 6.283185307179586},
               "factor": {"type": "modes", "modes": [{"k": 1, "sin": 0.3}]}},
    "recover": {"sites": [0, 8, 16]}})");
  EXPECT_EQ(cfg.n, 32);
  ASSERT_EQ(cfg.metrics.size(), 1u);
  EXPECT_EQ(cfg.metrics[0].band_limit(), 1);
  EXPECT_NEAR(cfg.metrics[0].v(8), 0.3, 1e-14);
  EXPECT_EQ(cfg.spin.flags, std::vector<Boundary>{Boundary::antiperiodic});
  EXPECT_EQ(cfg.recover.sites, (std::vector<std::size_t>{0, 8, 16}));
  EXPECT_EQ(cfg.echo["seed"], 1);
}

TEST(Config, ErrorsNameTheField) {
  const std::string circle = R"("metric": {"background": {"kind": "circle", "length": 6.28}})";
  EXPECT_EQ(message_of([&] { parse_config(R"({"kind": "build", "N": 31, )" + circle + "}"); }),
            "config.N: must be a positive even integer, got 31");
  EXPECT_EQ(message_of([&] { parse_config(R"({"kind": "teleport"})"); }), "config.kind: unknown scenario 'teleport'");
  EXPECT_EQ(message_of([&] { parse_config(R"({"kind": "build", "N": 8, "colour": 1, )" + circle + "}"); }),
            "config.colour: unknown field");
  EXPECT_EQ(message_of([&] { parse_config(R"({"kind": "build", "N": 8, "spin": ["periodic", "periodic"], )" + circle + "}"); }),
            "config.spin: expected 1 flag(s)");
  EXPECT_EQ(message_of([&] {
              parse_config(R"({"kind": "distance", "N": 16, "distance": {"x": 0, "y": 0, "band": 2}, )" + circle + "}");
            }),
            "config.distance.y: must differ from x");
  EXPECT_EQ(message_of([&] {
              parse_config(R"({"kind": "build", "N": 8, "metric": {"background": {"kind": "circle", "length": 6.28},
                "factor": {"type": "samples", "values": [1, 2]}}})");
            }),
            "config.metric.factor.values: expected 8 samples, got 2");
  EXPECT_EQ(message_of([&] { parse_config(R"({"kind": "build", "N": 8, "metric": {"file": "missing.json"}})", "/nonexistent"); }),
            "config.metric.file: cannot open '/nonexistent/missing.json'");
}

TEST(Config, MetricFileFeedsInputHash) {
  const auto dir = scratch_dir("cfg");
  save_metric((dir / "m.json").string(), make_circle_metric(two_pi, RealVector::Constant(16, 0.25), 0));
  const std::string text = R"({"kind": "build", "metric": {"file": "m.json"}})";
  const auto a = parse_config(text, dir);
  EXPECT_EQ(a.n, 16);
  save_metric((dir / "m.json").string(), make_circle_metric(two_pi, RealVector::Constant(16, 0.5), 0));
  const auto b = parse_config(text, dir);
  EXPECT_NE(git_blob_hash(a.input_blob), git_blob_hash(b.input_blob));
}

TEST(Config, SeedOverrideAndRandomFactor) {
  const std::string text = R"({"kind": "build", "N": 32, "seed": 5,
    "metric": {"background": {"kind": "circle", "length": 6.283185307179586},
               "factor": {"type": "random", "amplitude": 0.4, "band": 3}}})";
  const auto a = parse_config(text), b = parse_config(text), c = parse_config(text, ".", 6);
  EXPECT_EQ(a.seed, 5u);
  EXPECT_EQ(c.seed, 6u);
  EXPECT_EQ(a.metrics[0].v_samples(), b.metrics[0].v_samples());
  EXPECT_NE(a.metrics[0].v_samples(), c.metrics[0].v_samples());
  EXPECT_NEAR(a.metrics[0].v_samples().cwiseAbs().maxCoeff(), 0.4, 1e-12);
}

TEST(Run, BuildScenarioIsDeterministic) {
  const std::string text = R"({"kind": "build", "N": 16, "dump_operator": true,
    "metric": {"background": {"kind": "circle", "length": 6.283185307179586},
               "factor": {"type": "modes", "modes": [{"k": 2, "cos": 0.2}]}}})";
  const auto r1 = run(parse_config(text)), r2 = run(parse_config(text));
  EXPECT_EQ(r1.input_hash, r2.input_hash);
  EXPECT_EQ(r1.output_hash, r2.output_hash);
  EXPECT_EQ(r1.status, Status::ok);
  EXPECT_LE(r1.outputs["volume_form_defect"].get<double>(), 1e-12);
  ASSERT_EQ(r1.artifacts.size(), 2u);
  std::istringstream dump(r1.artifacts[1].content);
  EXPECT_EQ(read_operator(dump).matrix, build_dirac(parse_config(text).metrics[0], SpinStructure::circle(Boundary::antiperiodic)).matrix);

  const auto dir = scratch_dir("run");
  const auto files = write_outputs(r1, dir, true, true);
  EXPECT_EQ(files.size(), 4u);
  const auto result = json::parse(detail::read_text(dir / "result.json", "result"));
  EXPECT_EQ(result["input_hash"], r1.input_hash);
  EXPECT_EQ(result["output_hash"], git_blob_hash(result["outputs"].dump()));
}
