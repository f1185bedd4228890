#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "nlwave/nlwave.hpp"

using namespace nlwave;
namespace fs = std::filesystem;

namespace {

const char* kBase = R"(
[damping]
family = perturbation
delta = 0.1
k = 2
profile = timeonly

[gauge]
theta = 0.5
t_max = 2
x_min = -2
x_max = 2
step = 0.05

[sim]
p = 2
epsilon = 1
data = bump
u1_amplitude = 1
L = 1
dx = 0.05
t_cap = 10

[functionals]
tau_list = 1, 2
)";

std::string without_line(const std::string& text, const std::string& prefix) {
    std::istringstream in(text);
    std::string out, line;
    while (std::getline(in, line))
        if (line.rfind(prefix, 0) != 0) out += line + "\n";
    return out;
}

std::string replace_line(const std::string& text, const std::string& prefix, const std::string& with) {
    std::istringstream in(text);
    std::string out, line;
    while (std::getline(in, line)) out += (line.rfind(prefix, 0) == 0 ? with : line) + "\n";
    return out;
}

std::string config_error(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

fs::path scratch(const std::string& name) {
    fs::path d = fs::path(testing::TempDir()) / ("nlwave_io_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST(Config, ParsesAllBlocks) {
    const auto c = parse_config(kBase);
    EXPECT_EQ(c.damping.family, Family::Perturbation);
    EXPECT_DOUBLE_EQ(c.damping.delta, 0.1);
    EXPECT_EQ(c.damping.profile.kind, ProfileKind::TimeOnlyPower);
    EXPECT_TRUE(c.gauge.present);
    EXPECT_FALSE(c.gauge.s_max);
    EXPECT_DOUBLE_EQ(c.gauge.tail_tol, 1e-9);
    EXPECT_EQ(c.gauge.construct.lambda, 0.0);
    EXPECT_TRUE(c.sim.present);
    EXPECT_EQ(*c.sim.epsilon, 1.0);
    EXPECT_EQ(c.sim.data.kind, DataKind::Bump);
    EXPECT_EQ(c.sim.data.u0_amplitude, 0.0);
    EXPECT_EQ(c.functionals.tau_list, (std::vector<double>{1, 2}));
    EXPECT_EQ(c.functionals.variant, EnvelopeVariant::Thm1);
    EXPECT_NO_THROW(require_functionals(c));
    const auto [t, x] = solution_window(c);
    EXPECT_EQ(t, 2.0);
    EXPECT_EQ(x, 2.0);
}

TEST(Config, MissingKeyIsNamed) {
    EXPECT_NE(config_error(without_line(kBase, "k =")).find("missing key [damping] k"), std::string::npos);
    EXPECT_NE(config_error(without_line(kBase, "dx =")).find("[sim] dx"), std::string::npos);
    EXPECT_NE(config_error(without_line(kBase, "step =")).find("[gauge] step"), std::string::npos);
    EXPECT_NE(config_error(replace_line(kBase, "profile", "profile = cosine")).find("[damping] omega"),
              std::string::npos);
    EXPECT_NE(config_error(replace_line(kBase, "family", "family = scaleinvmu")).find("[damping] mu"),
              std::string::npos);
}

TEST(Config, RejectsBadValues) {
    EXPECT_NE(config_error(replace_line(kBase, "k =", "k = two")).find("[damping] k"), std::string::npos);
    EXPECT_NE(config_error(replace_line(kBase, "theta", "theta = 1.5")).find("[gauge] theta"), std::string::npos);
    EXPECT_NE(config_error(replace_line(kBase, "theta", "thta = 0.5")).find("unknown key [gauge] thta"),
              std::string::npos);
    EXPECT_NE(config_error(std::string(kBase) + "[plots]\nx = 1\n").find("unknown section"), std::string::npos);
    EXPECT_NE(config_error(replace_line(kBase, "family", "family = other")).find("[damping] family"),
              std::string::npos);
    EXPECT_NE(config_error(std::string(kBase) + "variant = thm2\n").find("does not match"), std::string::npos);
    EXPECT_FALSE(config_error(replace_line(kBase, "k =", "k = 0.5")).empty());
    // ScaleInvMu needs k > mu
    std::string mu = replace_line(kBase, "family", "family = scaleinvmu\nmu = 3");
    EXPECT_FALSE(config_error(mu).empty());
    EXPECT_TRUE(config_error(replace_line(mu, "k =", "k = 4")).empty());
}

TEST(Config, CrossFieldChecks) {
    auto c = parse_config(replace_line(kBase, "step", "step = 0.025"));
    EXPECT_THROW(require_functionals(c), ConfigError);
    c = parse_config(replace_line(kBase, "x_max", "x_max = 1.5"));
    EXPECT_THROW(require_functionals(c), ConfigError);
    c = parse_config(replace_line(kBase, "tau_list", "tau_list = 1, 3"));
    EXPECT_THROW(require_functionals(c), ConfigError);
    c = parse_config(replace_line(kBase, "x_min", "x_min = -2.025"));
    EXPECT_THROW(require_functionals(c), ConfigError);

    c = parse_config(std::string(kBase) + "[output]\n" + "formats = csv\n");
    EXPECT_TRUE(c.output.csv);
    EXPECT_FALSE(c.output.json);

    auto s = parse_config(replace_line(kBase, "epsilon", "eps_list = 0.5, 0.25"));
    EXPECT_THROW(require_sweep(s), ConfigError);
    EXPECT_THROW(require_simulation(s), ConfigError);
    s = parse_config(replace_line(kBase, "epsilon", "eps_list = 0.5, 0.25, 0.125, 0.0625"));
    EXPECT_NO_THROW(require_sweep(s));
}

TEST(Config, HashIgnoresLayout) {
    const auto a = parse_config(kBase);
    std::string shuffled = replace_line(kBase, "delta", "delta   =   0.1");
    shuffled = replace_line(without_line(shuffled, "k ="), "family", "k = 2\nfamily = perturbation");
    const auto b = parse_config(shuffled);
    EXPECT_EQ(a.hash, b.hash);
    EXPECT_EQ(a.canonical, b.canonical);
    const auto c = parse_config(replace_line(kBase, "delta", "delta = 0.2"));
    EXPECT_NE(a.hash, c.hash);
    EXPECT_EQ(hex64(fnv1a64("")), "cbf29ce484222325");
    EXPECT_EQ(hex64(fnv1a64("a")), "af63dc4c8601ec8c");
}

TEST(Csv, RoundTripIsExact) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-1, 1);
    CsvTable t{{"a", "b", "c"}, {}};
    for (int i = 0; i < 200; ++i) t.rows.push_back({U(rng) * 1e-300, U(rng) * 1e300, std::exp(40 * U(rng))});
    t.rows.push_back({0.0, -0.0, 1.0 / 3.0});
    const auto d = scratch("csv");
    write_csv(d / "t.csv", t);
    const auto r = read_csv(d / "t.csv");
    EXPECT_EQ(r.header, t.header);
    ASSERT_EQ(r.rows.size(), t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        for (std::size_t j = 0; j < 3; ++j) ASSERT_EQ(std::memcmp(&r.rows[i][j], &t.rows[i][j], sizeof(double)), 0);
    std::ifstream in(d / "t.csv");
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "a,b,c");
    EXPECT_THROW(read_csv(d / "absent.csv"), MissingArtifact);
    EXPECT_THROW(r.column("z"), MissingArtifact);
}

TEST(Csv, GaugeTableRoundTrip) {
    auto spec = make_damping(Family::ScaleInv2, 0.05, 2.0, PerturbationProfile::cosine(1.0));
    const auto grid = build_grid(1.0, -1.0, 1.0, 0.05, 4.0);
    const auto res = construct_h(spec, grid);
    const auto d = scratch("gauge");
    const auto csv = gauge_csv(res.triple, res.gauge);
    EXPECT_EQ(csv.header, (std::vector<std::string>{"t", "x", "h", "v1", "v2", "dh_dx", "g", "g_t", "g_x"}));
    EXPECT_EQ(csv.rows.size(), grid.nt * grid.nx);
    write_csv(d / "gauge.csv", csv);
    const auto table = std::make_shared<const GaugeTable>(read_gauge_table(d / "gauge.csv"));
    EXPECT_EQ(table->nt, grid.nt);
    EXPECT_EQ(table->nx, grid.nx);
    const GaugeLookup from_file(table), from_lattice(std::make_shared<const GaugeField>(res.gauge));
    const auto direct = std::make_shared<const GaugeTable>(gauge_table(res.gauge));
    const GaugeLookup from_memory(direct);
    for (std::size_t l = 0; l < grid.nt; ++l)
        for (std::size_t c = 0; c < grid.nx; ++c) {
            const double t = grid.t(l), x = grid.x_min + static_cast<double>(c) * grid.step;
            const auto a = from_file.at(t, x), b = from_lattice.at(t, x), m = from_memory.at(t, x);
            ASSERT_EQ(a.g, b.g);
            ASSERT_EQ(a.g_t, b.g_t);
            ASSERT_EQ(a.g_x, b.g_x);
            ASSERT_EQ(m.g, b.g);
        }
    EXPECT_THROW(from_file.at(0.0, 1.05), DomainError);
    EXPECT_THROW(from_file.at(0.01, 0.0), DomainError);
}

TEST(Csv, SolutionRoundTrip) {
    SimOptions o;
    o.t_cap = 1.0;
    o.store_stride = 1;
    InitialData data;
    const auto s = run_until_blowup(make_damping(Family::Perturbation, 0.0, 2.0, PerturbationProfile::zero()), data,
                                    2.0, 0.05, o);
    const auto d = scratch("solution");
    write_csv(d / "solution.csv", solution_csv(s.stored, 1.5));
    const auto f = read_solution(d / "solution.csv");
    EXPECT_EQ(f.nt, s.stored.nt);
    EXPECT_EQ(f.nx, 61u);
    EXPECT_NEAR(f.x0, -1.5, 1e-12);
    EXPECT_NEAR(f.dx, 0.05, 1e-12);
    const std::size_t off = static_cast<std::size_t>(std::llround((f.x0 - s.stored.x0) / s.stored.dx));
    for (std::size_t m = 0; m < f.nt; ++m)
        for (std::size_t j = 0; j < f.nx; ++j) {
            ASSERT_EQ(f.at(m, j), s.stored.at(m, j + off));
            ASSERT_EQ(f.dt_at(m, j), s.stored.dt_at(m, j + off));
        }
}

TEST(Csv, ReplayRecords) {
    const auto d = scratch("replay");
    std::ofstream(d / "r.csv") << "epsilon,T_eps\n0.5,2\n0.25,3\n";
    auto recs = read_replay(d / "r.csv");
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_TRUE(recs[0].confirmed);
    EXPECT_EQ(*recs[1].T_eps, 3.0);
    std::ofstream(d / "s.csv") << "epsilon,T_eps,confirmed\n0.5,2,0\n0.25,,1\n";
    recs = read_replay(d / "s.csv");
    EXPECT_FALSE(recs[0].confirmed);
    EXPECT_FALSE(recs[1].T_eps);
    std::ofstream(d / "bad.csv") << "epsilon,T_eps\n0.5,x\n";
    EXPECT_THROW(read_replay(d / "bad.csv"), MissingArtifact);
}

TEST(Manifest, MergesStages) {
    const auto d = scratch("manifest");
    update_manifest(d, "h1", "simulate", Json{{"status", "BlewUp"}}, {"norm_history.csv"}, utc_timestamp());
    update_manifest(d, "h1", "sweep", Json{{"status", "consistent"}}, {"sweep.csv", "fit.json"}, utc_timestamp());
    const auto m = read_json(d / "manifest.json");
    EXPECT_EQ(m["version"], kToolVersion);
    EXPECT_EQ(m["stages"]["simulate"]["status"], "BlewUp");
    EXPECT_EQ(m["stages"]["sweep"]["config_hash"], "h1");
    EXPECT_EQ(m["files"], (std::vector<std::string>{"fit.json", "manifest.json", "norm_history.csv", "sweep.csv"}));
    EXPECT_TRUE(m["stages"]["sweep"].contains("started"));
    EXPECT_TRUE(m["stages"]["sweep"].contains("finished"));
}

TEST(Json, NonFiniteBecomesNull) {
    EXPECT_TRUE(json_number(std::nan("")).is_null());
    EXPECT_TRUE(json_number(std::optional<double>{}).is_null());
    EXPECT_EQ(json_number(0.25).get<double>(), 0.25);
    const double third = 1.0 / 3.0;
    EXPECT_EQ(Json::parse(Json(third).dump()).get<double>(), third);
}
