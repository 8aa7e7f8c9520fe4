#include <random>
#include <sstream>

#include "diafactor/errors.hpp"
#include "diafactor/intervals.hpp"
#include "diafactor/rttm.hpp"
#include "diafactor/structure.hpp"
#include "diafactor/timeline.hpp"
#include "doctest.h"

using namespace diafactor;

namespace {

Timeline make_timeline(const std::vector<std::tuple<double, double, std::string>>& segs,
                       const std::string& id = "rec") {
  std::vector<Segment> out;
  for (const auto& [onset, dur, label] : segs)
    out.push_back(Segment::from_seconds(onset, dur, label));
  return Timeline(id, std::move(out));
}

}  // namespace

TEST_SUITE("annotation") {

TEST_CASE("interval set algebra") {
  IntervalSet s;
  s.add(0, 10);
  s.add(20, 30);
  CHECK(s.total() == 20);
  s.add(5, 25);  // bridges both
  CHECK(s.size() == 1);
  CHECK(s.total() == 30);

  IntervalSet t;
  t.add(8, 12);
  t.add(40, 50);
  CHECK(s.intersect(t).total() == 4);
  CHECK(s.unite(t).total() == 40);
  CHECK(s.subtract(t).total() == 26);
  CHECK(s.intersect_total(25, 100) == 5);

  IntervalSet empty;
  CHECK(empty.total() == 0);
  CHECK(empty.intersect(s).empty());
  CHECK(s.subtract(empty) == s);
}

TEST_CASE("interval subtraction splits correctly") {
  IntervalSet s;
  s.add(0, 100);
  IntervalSet holes;
  holes.add(10, 20);
  holes.add(30, 40);
  auto d = s.subtract(holes);
  REQUIRE(d.size() == 3);
  CHECK(d.intervals()[0] == IntervalSet::Interval{0, 10});
  CHECK(d.intervals()[1] == IntervalSet::Interval{20, 30});
  CHECK(d.intervals()[2] == IntervalSet::Interval{40, 100});
}

TEST_CASE("parse single SPEAKER record") {
  auto t = parse_rttm("SPEAKER c1 1 0.00 3.00 <NA> <NA> spkA <NA> <NA>");
  REQUIRE(t.size() == 1);
  CHECK(t.recording_id() == "c1");
  CHECK(t.segments()[0] == Segment{0, 3000, "spkA"});
}

TEST_CASE("parse empty file") {
  auto t = parse_rttm("");
  CHECK(t.size() == 0);
}

TEST_CASE("non-SPEAKER records are ignored") {
  auto t = parse_rttm(
      "SPKR-INFO c1 1 <NA> <NA> <NA> unknown spkA <NA>\n"
      "SPEAKER c1 1 1.0 2.0 <NA> <NA> spkA <NA> <NA>\n");
  CHECK(t.size() == 1);
}

TEST_CASE("overlap query reports shared time") {
  // A covers 0-3, B covers 2-4: contested region is 2-3, one second.
  auto t = make_timeline({{0.0, 3.0, "spkA"}, {2.0, 2.0, "spkB"}});
  CHECK(t.overlapped_time_ms() == 1000);
  CHECK(t.has_overlap());

  auto clean = make_timeline({{0.0, 3.0, "spkA"}, {4.0, 1.0, "spkB"}});
  CHECK_FALSE(clean.has_overlap());

  // Same-label overlap does not count as speaker overlap.
  auto same = make_timeline({{0.0, 3.0, "spkA"}, {2.0, 2.0, "spkA"}});
  CHECK(same.overlapped_time_ms() == 0);
}

TEST_CASE("malformed SPEAKER line reports line number") {
  CHECK_THROWS_WITH_AS(parse_rttm("SPEAKER c1 1 0.0 3.0 <NA>"),
                       doctest::Contains("line 1"), ParseError);
  CHECK_THROWS_WITH_AS(parse_rttm("SPEAKER c1 1 0.0 oops <NA> <NA> a <NA> <NA>"),
                       doctest::Contains("duration"), ParseError);
  CHECK_THROWS_AS(parse_rttm("SPEAKER c1 1 0.0 -3.0 <NA> <NA> a <NA> <NA>"), ValidationError);
}

TEST_CASE("segment invariants are enforced") {
  CHECK_THROWS_AS(make_timeline({{-1.0, 2.0, "a"}}), ValidationError);
  CHECK_THROWS_AS(make_timeline({{0.0, 0.0, "a"}}), ValidationError);
  CHECK_THROWS_AS(make_timeline({{0.0, 1.0, ""}}), ValidationError);
}

TEST_CASE("emit produces one line per segment") {
  auto t = make_timeline({{0.0, 3.0, "spkA"}});
  auto text = emit_rttm(t);
  CHECK(text == "SPEAKER rec 1 0.000 3.000 <NA> <NA> spkA <NA> <NA>\n");
}

TEST_CASE("rttm round-trip is identity for random timelines") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> onset(0, 600000);
  std::uniform_int_distribution<int> dur(1, 30000);
  std::uniform_int_distribution<int> lab(0, 3);
  std::vector<Segment> segs;
  for (int i = 0; i < 100; ++i)
    segs.push_back({onset(rng), dur(rng), "spk" + std::to_string(lab(rng))});
  Timeline t("rt", std::move(segs));
  CHECK(parse_rttm(emit_rttm(t)) == t);
}

TEST_CASE("emit precision keeps times within a millisecond") {
  auto t = make_timeline({{0.0, 1.2345, "a"}});
  auto back = parse_rttm(emit_rttm(t, 3));
  CHECK(std::abs(back.segments()[0].duration() - 1.2345) <= 1e-3);
  auto back4 = parse_rttm(emit_rttm(t, 4));
  CHECK(std::abs(back4.segments()[0].duration() - 1.2345) <= 1e-3);
}

TEST_CASE("extract_structure emits silence for gaps") {
  auto t = make_timeline({{0.0, 3.0, "x"}, {4.0, 1.0, "y"}});
  auto st = extract_structure(t, {{"x", "A"}, {"y", "B"}});
  REQUIRE(st.slots.size() == 3);
  CHECK(st.slots[0] == StructureSlot{"A", 3000});
  CHECK(st.slots[1] == StructureSlot{kSilenceRole, 1000});
  CHECK(st.slots[2] == StructureSlot{"B", 1000});
  CHECK(st.roles() == std::vector<std::string>{"A", "B"});
}

TEST_CASE("gapless two-role schedule round-trips through a timeline") {
  // Seven segments, roles A A A B B A A with durations 3 2 4 1.5 0.5 6 2.
  const std::vector<std::pair<std::string, double>> slots = {
      {"A", 3.0}, {"A", 2.0}, {"A", 4.0}, {"B", 1.5}, {"B", 0.5}, {"A", 6.0}, {"A", 2.0}};
  std::vector<Segment> segs;
  double at = 0.0;
  for (const auto& [role, dur] : slots) {
    segs.push_back(Segment::from_seconds(at, dur, role == "A" ? "alice" : "bob"));
    at += dur;
  }
  auto st = extract_structure(Timeline("s2", std::move(segs)), {{"alice", "A"}, {"bob", "B"}});
  REQUIRE(st.slots.size() == 7);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    CHECK(st.slots[i].role == slots[i].first);
    CHECK(st.slots[i].duration() == doctest::Approx(slots[i].second));
  }
  CHECK(st.role_time_ms("A") == 17000);
  CHECK(st.role_time_ms("B") == 2000);
}

TEST_CASE("overlap resolution: later onset wins") {
  auto t = make_timeline({{0.0, 3.0, "x"}, {2.0, 2.0, "y"}});
  auto st = extract_structure(t, {{"x", "A"}, {"y", "B"}});
  REQUIRE(st.slots.size() == 2);
  CHECK(st.slots[0] == StructureSlot{"A", 2000});
  CHECK(st.slots[1] == StructureSlot{"B", 2000});
}

TEST_CASE("swallowed segment disappears") {
  // y starts at the same onset as x; x is truncated to zero and dropped.
  auto t = make_timeline({{1.0, 0.5, "x"}, {1.0, 2.0, "y"}});
  auto st = extract_structure(t, {{"x", "A"}, {"y", "B"}});
  REQUIRE(st.slots.size() == 1);
  CHECK(st.slots[0].role == "B");
}

TEST_CASE("missing role map entry names the label") {
  auto t = make_timeline({{0.0, 1.0, "mystery"}});
  CHECK_THROWS_WITH_AS(extract_structure(t, {{"x", "A"}}), doctest::Contains("mystery"),
                       ValidationError);
  CHECK_THROWS_AS(extract_structure(t, {{"mystery", kSilenceRole}}), ValidationError);
}

TEST_CASE("adjacent same-role segments stay distinct slots") {
  auto t = make_timeline({{0.0, 3.0, "x"}, {3.0, 2.0, "x"}});
  auto st = extract_structure(t, {{"x", "A"}});
  REQUIRE(st.slots.size() == 2);
  CHECK(st.slots[0].duration_ms == 3000);
  CHECK(st.slots[1].duration_ms == 2000);
}

TEST_CASE("sub-threshold gaps are compacted, keeping role time exact") {
  auto t = make_timeline({{0.0, 3.0, "x"}, {3.05, 0.95, "y"}});
  auto st = extract_structure(t, {{"x", "A"}, {"y", "B"}}, 0.1);
  REQUIRE(st.slots.size() == 2);
  CHECK(st.role_time_ms("B") == 950);
  CHECK(st.total_ms() == 3950);

  // min_gap 0 keeps every positive gap.
  auto st0 = extract_structure(t, {{"x", "A"}, {"y", "B"}}, 0.0);
  REQUIRE(st0.slots.size() == 3);
  CHECK(st0.slots[1] == StructureSlot{kSilenceRole, 50});
}

TEST_CASE("structure properties on random overlap-free timelines") {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> dur(100, 5000);
  std::uniform_int_distribution<int> gap(0, 3000);
  std::uniform_int_distribution<int> lab(0, 2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Segment> segs;
    Ticks at = 500;
    for (int i = 0; i < 40; ++i) {
      Ticks d = dur(rng);
      segs.push_back({at, d, "spk" + std::to_string(lab(rng))});
      at += d;
      Ticks g = gap(rng);
      if (g >= 100) at += g;  // keep gaps at or above min_gap so none compact away
    }
    Timeline t("p", std::move(segs));
    auto st = extract_structure(t, {{"spk0", "A"}, {"spk1", "B"}, {"spk2", "C"}});

    // Total structure duration equals the timeline span.
    CHECK(st.total_ms() == t.span_end_ms() - t.span_begin_ms());
    // No two consecutive silence slots, no zero-duration slots.
    for (std::size_t i = 0; i < st.slots.size(); ++i) {
      CHECK(st.slots[i].duration_ms > 0);
      bool consecutive_silence =
          i > 0 && st.slots[i].is_silence() && st.slots[i - 1].is_silence();
      CHECK_FALSE(consecutive_silence);
    }
    // Per-role speech time never exceeds the original label time.
    CHECK(st.role_time_ms("A") <= t.label_time_ms("spk0"));
    CHECK(st.role_time_ms("B") <= t.label_time_ms("spk1"));
    CHECK(st.role_time_ms("C") <= t.label_time_ms("spk2"));
  }
}

TEST_CASE("structure file round-trips with tags") {
  ConversationStructure a{"fisher_001",
                          {{"gender", "f"}, {"language", "en"}},
                          {{"A", 3000}, {kSilenceRole, 1000}, {"B", 1500}}};
  ConversationStructure b{"fisher_002", {}, {{"B", 250}, {"A", 4000}}};
  auto text = write_structures({a, b});
  auto back = parse_structures(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == a);
  CHECK(back[1] == b);
}

TEST_CASE("structure file rejects out-of-order indices") {
  CHECK_THROWS_AS(parse_structures("s1\t1\tA\t2.000\n"), ValidationError);
  CHECK_THROWS_AS(parse_structures("s1\t0\tA\tnope\n"), ParseError);
}

}  // TEST_SUITE
