#include "lch/chain_model.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace lch;

TEST_CASE("empty config yields the model defaults") {
    const Config c = parse_config("");
    CHECK(c == default_config());
    CHECK(c.env.n_sites == 30);
    CHECK(c.env.epsilon == std::vector<double>(30, 1.0));
    CHECK(c.env.hopping == std::vector<double>(29, 0.05));
    CHECK(c.system.coupling == 0.1);
    CHECK(c.system.drive_amplitude == 0.1);
    CHECK(c.thresholds.n_cut == 4);
    CHECK(c.grid.t_final == 100.0);
    CHECK(c.thresholds.r_cut == 1e-4);
    CHECK(c.thresholds.is_relative());
    CHECK(c.grid.dt() <= 0.05 + 1e-15);
}

TEST_CASE("two-site chain has a single hopping") {
    const Config c = parse_config("n_sites=2\nhopping=0.05\n");
    CHECK(c.env.n_sites == 2);
    REQUIRE(c.env.hopping.size() == 1);
    const Eigen::MatrixXd h = c.env.hamiltonian();
    CHECK(h(0, 1) == 0.05);
    CHECK(h(1, 0) == 0.05);
    CHECK(h(0, 0) == 1.0);
}

TEST_CASE("config parsing accepts comments, lists and whitespace") {
    const Config c = parse_config("# chain\n n_sites = 3 \nepsilon=1,2,3  # trailing\nhopping=0.1,0.2\nT=10\nn_steps=40\n");
    CHECK(c.env.epsilon == std::vector<double>{1, 2, 3});
    CHECK(c.env.hopping == std::vector<double>{0.1, 0.2});
    CHECK(c.grid.n_steps == 40);
    CHECK(c.grid.dt() == doctest::Approx(0.25));
    CHECK(c.env.lieb_robinson_velocity() == doctest::Approx(0.4));
    CHECK(c.thresholds.lieb_robinson_velocity == doctest::Approx(0.4));
}

TEST_CASE("T without n_steps picks the finest grid with dt <= 0.05") {
    const Config c = parse_config("T=1.01");
    CHECK(c.grid.n_steps == 21);
    CHECK(c.grid.dt() <= 0.05);
}

TEST_CASE("config errors are typed") {
    CHECK_THROWS_AS(parse_config("g=-1"), ValidationError);
    CHECK_THROWS_AS(parse_config("n_sites=1"), ValidationError);
    CHECK_THROWS_AS(parse_config("bogus=1"), ConfigParseError);
    CHECK_THROWS_AS(parse_config("g=0.1\ng=0.2"), ConfigParseError);
    CHECK_THROWS_AS(parse_config("g=abc"), ConfigParseError);
    CHECK_THROWS_AS(parse_config("n_cut=2.5"), ConfigParseError);
    CHECK_THROWS_AS(parse_config("just text"), ConfigParseError);
    CHECK_THROWS_AS(parse_config("n_sites=3\nepsilon=1,2"), ValidationError);
    CHECK_THROWS_AS(parse_config("r_cut=1e-3\na_cut=1e-4"), ValidationError);
    CHECK_THROWS_AS(parse_config("r_cut=0"), ValidationError);
    CHECK_THROWS_AS(parse_config("T=0"), ValidationError);
    CHECK_THROWS_AS(load_config("/nonexistent/file.cfg"), ConfigParseError);
}

TEST_CASE("serialize and parse round-trip exactly") {
    Config c = parse_config("n_sites=4\nepsilon=1,1.25,0.3333333333333333,2\nhopping=0.05\ng=0.07\nseed=7\na_cut=1e-5");
    const Config back = parse_config(serialize_config(c));
    CHECK(back == c);
    CHECK(config_hash(back) == config_hash(c));
    CHECK(config_hash(c).size() == 16);
    c.system.coupling = 0.08;
    CHECK(config_hash(c) != config_hash(back));
}

TEST_CASE("config files load from disk") {
    const auto path = std::filesystem::temp_directory_path() / "lch_test_chain.cfg";
    {
        std::ofstream out(path);
        out << "n_sites=5\nT=2\nn_steps=10\n";
    }
    const Config c = load_config(path);
    CHECK(c.env.n_sites == 5);
    CHECK(c.grid.time(10) == 2.0);
    std::filesystem::remove(path);
}

TEST_CASE("time grid indexing") {
    const TimeGrid g{10.0, 200};
    CHECK(g.size() == 201);
    CHECK(g.index_of(0.0) == 0);
    CHECK(g.index_of(10.0) == 200);
    CHECK(g.index_of(g.time(37)) == 37);
    CHECK_THROWS_AS(g.index_of(0.025), std::out_of_range);
    CHECK_THROWS_AS(g.index_of(11.0), std::out_of_range);
    const TimeGrid fine = TimeGrid::with_max_step(3.0, 0.05);
    CHECK(fine.n_steps == 60);
}

TEST_CASE("absolute cut from the relative threshold") {
    Thresholds t;
    t.r_cut = 1e-3;
    CHECK(t.absolute_cut(50.0) == doctest::Approx(0.05));
    t.a_cut = 1e-6;
    CHECK(t.absolute_cut(50.0) == 1e-6);
}

TEST_CASE("chain Hamiltonian is real symmetric tridiagonal") {
    const auto env = ChainEnvironment::uniform(6, 1.0, 0.05);
    const Eigen::MatrixXd h = env.hamiltonian();
    CHECK((h - h.transpose()).norm() == 0.0);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            if (std::abs(i - j) > 1) CHECK(h(i, j) == 0.0);
    CHECK(env.lieb_robinson_velocity() == doctest::Approx(0.1));
}
