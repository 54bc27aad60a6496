#include <doctest.h>

#include <thread>

#include "bagscan/error.hpp"
#include "bagscan/generators.hpp"
#include "bagscan/graph_io.hpp"
#include "bagscan/junction_tree.hpp"
#include "bagscan/service.hpp"
#include "support.hpp"

using namespace bagscan;
using namespace bagscan::testing;

namespace {

QueryOptions with(Method m, bool cold = false) { return QueryOptions{m, cold}; }

ErrorKind kind_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::Internal;
}

}  // namespace

TEST_SUITE("service") {

TEST_CASE("worked example through a session") {
  SessionManager sessions;
  auto s = sessions.create(example_graph());
  CHECK(s->id() == "s1");
  auto b = s->beliefs({});
  CHECK(b.at("method") == "jt");
  CHECK(b.at("beliefs").at("F").get<double>() == doctest::Approx(0.799).epsilon(0.005));

  auto d = s->set_evidence({{"D", true}}, with(Method::Jt));
  CHECK(d.at("beliefs").at("F").get<double>() == doctest::Approx(0.848).epsilon(0.005));
  CHECK(d.at("evidence").at("D") == true);

  auto p = s->add_patch({{"from", "D"}, {"to", "F"}}, with(Method::Jt));
  CHECK(p.at("beliefs").at("F").get<double>() == doctest::Approx(0.242).epsilon(0.005));
  CHECK(p.at("patches").size() == 1);

  auto cleared = s->set_evidence(nlohmann::json::object(), with(Method::Jt));
  auto library = JunctionTree::build(patch(example_graph(), 4, 6)).marginals();
  for (const auto& node : cleared.at("nodes")) CHECK(node.at("belief").get<double>() == library[node.at("id")]);
}

TEST_CASE("results equal the library bit for bit") {
  auto g = generate(GeneratorSpec{Family::PseudoRandom, 50, 3, 0.5, 0, 5});
  SessionManager sessions;
  auto s = sessions.create(g);
  auto jt = s->beliefs(with(Method::Jt));
  auto lib = JunctionTree::build(g).marginals();
  for (const auto& node : jt.at("nodes")) CHECK(node.at("belief").get<double>() == lib[node.at("id")]);

  auto lbp = s->beliefs(with(Method::PLbp, true));
  auto ref = run_parallel(from_bag(g), LbpConfig{});
  for (const auto& node : lbp.at("nodes")) CHECK(node.at("belief").get<double>() == ref.beliefs[node.at("id")]);
  CHECK(lbp.at("iterations") == ref.iterations);
}

TEST_CASE("warm LBP stays within tolerance of cold") {
  auto g = generate(GeneratorSpec{Family::PseudoRandom, 80, 3, 0.5, 0, 6});
  SessionManager sessions;
  auto s = sessions.create(g);
  s->beliefs(with(Method::PLbp));
  auto warm = s->set_evidence({{"n60", true}}, with(Method::PLbp));
  auto cold = s->beliefs(with(Method::PLbp, true));
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(std::abs(warm.at("nodes")[i].at("belief").get<double>() -
                   cold.at("nodes")[i].at("belief").get<double>()) < 5e-3);
}

TEST_CASE("errors leave the session unchanged") {
  SessionManager sessions;
  auto s = sessions.create(example_graph());
  s->set_evidence({{"D", true}}, with(Method::Jt));
  CHECK(kind_of([&] { s->set_evidence({{"Q", true}}, {}); }) == ErrorKind::NotFound);
  CHECK(kind_of([&] { s->set_evidence({{"D", 1}}, {}); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { s->set_evidence(nlohmann::json::array(), {}); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { s->set_evidence({{"A1", false}, {"B", true}}, {}); }) == ErrorKind::InconsistentEvidence);
  CHECK(kind_of([&] { s->add_patch({{"from", "F"}, {"to", "D"}}, {}); }) == ErrorKind::NotFound);
  CHECK(kind_of([&] { s->add_patch({{"from", "D"}}, {}); }) == ErrorKind::InvalidArgument);
  CHECK(s->evidence().size() == 1);
  CHECK(s->current_graph() == example_graph());
  CHECK(kind_of([&] { sessions.find("s9"); }) == ErrorKind::NotFound);
  CHECK(kind_of([&] { s->stream_iterations(Method::Jt, false, [](const nlohmann::json&) { return true; }); }) ==
        ErrorKind::InvalidArgument);
}

TEST_CASE("undo restores the original graph") {
  SessionManager sessions;
  auto g = example_graph();
  auto s = sessions.create(g);
  auto before = s->beliefs({});
  s->add_patch({{"from", "D"}, {"to", "F"}}, {});
  s->add_patch({{"from", "C"}, {"to", "E"}}, {});
  CHECK(s->graph_json().at("patched").size() == 2);
  auto after = s->clear_patches({});
  CHECK(graph_to_json(s->current_graph()).dump() == graph_to_json(g).dump());
  CHECK(after.at("beliefs") == before.at("beliefs"));
  CHECK(s->graph_json().at("patched").empty());
}

TEST_CASE("feasibility and default method") {
  auto dense = generate(GeneratorSpec{Family::PseudoRandom, 150, 4, 0.5, 0, 1});
  SessionManager sessions;
  auto s = sessions.create(dense);
  auto f = s->feasibility();
  CHECK(f.at("fits") == false);
  CHECK(f.at("default_method") == "plbp");
  CHECK(s->beliefs({}).at("method") == "plbp");
  CHECK(kind_of([&] { s->beliefs(with(Method::Jt)); }) == ErrorKind::ResourceLimit);

  auto small = sessions.create(example_graph());
  CHECK(small->feasibility().at("fits") == true);
  CHECK(sessions.size() == 2);
}

TEST_CASE("iteration stream") {
  auto g = generate(GeneratorSpec{Family::PseudoRandom, 100, 3, 0.5, 0, 2});
  SessionManager sessions;
  auto s = sessions.create(g);
  std::vector<nlohmann::json> frames;
  auto done = s->stream_iterations(Method::PLbp, true, [&](const nlohmann::json& frame) {
    frames.push_back(frame);
    return true;
  });
  REQUIRE(!frames.empty());
  CHECK(frames.front().at("iteration") == 1);
  CHECK(frames.back().at("beliefs") == done.at("beliefs"));
  CHECK(done.at("iterations") == frames.size());

  std::size_t seen = 0;
  auto cancelled = s->stream_iterations(Method::SLbp, true, [&](const nlohmann::json&) { return ++seen < 2; });
  CHECK(cancelled.is_null());
  CHECK(seen == 2);
}

TEST_CASE("concurrent evidence updates serialize") {
  auto g = generate(GeneratorSpec{Family::PseudoRandom, 60, 3, 0.5, 0, 9});
  SessionManager sessions;
  auto s = sessions.create(g);
  const std::vector<nlohmann::json> bodies{{{"n10", true}}, {{"n20", true}}, {{"n30", true}, {"n40", true}}};
  std::vector<nlohmann::json> expected;
  for (const auto& body : bodies) {
    EvidenceSet ev;
    for (const auto& [label, v] : body.items()) ev.observe(*g.find_label(label), v.get<bool>());
    expected.push_back(nlohmann::json(JunctionTree::build(g).marginals(ev)));
  }
  for (int round = 0; round < 5; ++round) {
    std::vector<std::thread> threads;
    for (const auto& body : bodies)
      threads.emplace_back([&, body] {
        for (int i = 0; i < 4; ++i) s->set_evidence(body, with(Method::Jt));
      });
    std::thread reader([&] {
      for (int i = 0; i < 10; ++i) {
        auto snap = s->beliefs(with(Method::Jt));
        nlohmann::json values = nlohmann::json::array();
        for (const auto& node : snap.at("nodes")) values.push_back(node.at("belief"));
        CHECK(std::find(expected.begin(), expected.end(), values) != expected.end());
      }
    });
    for (auto& t : threads) t.join();
    reader.join();
    auto final_ev = s->evidence();
    bool matches = false;
    for (const auto& body : bodies) {
      EvidenceSet ev;
      for (const auto& [label, v] : body.items()) ev.observe(*g.find_label(label), v.get<bool>());
      matches = matches || ev == final_ev;
    }
    CHECK(matches);
  }
}

TEST_CASE("http status mapping") {
  CHECK(http_status(ErrorKind::NotFound) == 404);
  CHECK(http_status(ErrorKind::InconsistentEvidence) == 409);
  CHECK(http_status(ErrorKind::InvalidArgument) == 422);
  CHECK(http_status(ErrorKind::InvalidEvidence) == 422);
  CHECK(http_status(ErrorKind::InvalidModel) == 422);
  CHECK(http_status(ErrorKind::ResourceLimit) == 507);
  CHECK(http_status(ErrorKind::Internal) == 500);
}

}  // TEST_SUITE
