#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mdc/csv.hpp"
#include "mdc/error.hpp"
#include "mdc/pipeline.hpp"

using namespace mdc;
using namespace mdc::pipeline;

namespace {

FlowgateSeries ramp(std::size_t len, std::size_t gates = 2, std::size_t feats = 2) {
  FlowgateSeries s;
  s.n_gates = gates;
  s.n_features = feats;
  s.interval_minutes = 15;
  for (std::size_t t = 0; t < len; ++t) {
    s.timestamps.push_back(csv::format_timestamp(1577836800 + 900 * static_cast<std::int64_t>(t)));
    for (std::size_t i = 0; i < gates; ++i) {
      s.flow.push_back(10.0 * static_cast<double>(t) + static_cast<double>(i));
      s.capacity.push_back(1000.0);
    }
    for (std::size_t f = 0; f < feats; ++f) s.features.push_back(static_cast<double>(t * 10 + f));
  }
  return s;
}

}  // namespace

TEST_CASE("security margin is one minus the loading ratio") {
  CHECK(security_margin(300.0, 1200.0) == doctest::Approx(0.75));
  CHECK(security_margin(1500.0, 1000.0) == doctest::Approx(-0.5));
  CHECK_THROWS(security_margin(1.0, 0.0));
  const auto m = compute_margins(ramp(3));
  CHECK(m.size() == 6);
  CHECK(m[3] == doctest::Approx(1.0 - 11.0 / 1000.0));
}

TEST_CASE("windows cover every admissible anchor") {
  const FlowgateSeries s = ramp(20);
  const auto w = build_windows(s, 3, 2);
  CHECK(w.size() == 20 - 3 - 2 + 1);
  CHECK(w.front().anchor == 2);
  CHECK(w.front().x.rows() == 3);
  CHECK(w.front().x.at(0, 1) == 1.0);  // row t=0, feature 1
  CHECK(w.front().x.at(2, 0) == 20.0);
  CHECK(w.front().target[0] == doctest::Approx(1.0 - 40.0 / 1000.0));  // t = 4
  CHECK(w.front().anchor_time == s.timestamps[2]);
  CHECK(w.back().anchor == 17);
  CHECK_THROWS(build_windows(ramp(5), 3, 2));
  CHECK_THROWS(build_windows(s, 0, 1));
}

TEST_CASE("lag conversion floors and keeps at least one step") {
  CHECK(minutes_to_steps(20, 15) == 1);
  CHECK(minutes_to_steps(45, 15) == 3);
  CHECK(minutes_to_steps(5, 15) == 1);
  CHECK(minutes_to_steps(60, 5) == 12);
}

TEST_CASE("chronological split is 40/20/40 with the remainder in test") {
  const SplitRanges r = chronological_split(10000);
  CHECK(r.train.size() == 4000);
  CHECK(r.validation.size() == 2000);
  CHECK(r.test.size() == 4000);
  const SplitRanges q = chronological_split(13);
  CHECK(q.train.size() == 5);
  CHECK(q.validation.size() == 2);
  CHECK(q.test.size() == 6);
  CHECK(q.validation.begin == q.train.end);
  CHECK(q.test.end == 13);
}

TEST_CASE("features are z-scored with training statistics only") {
  const DatasetSplit d = split_and_normalize(build_windows(ramp(40), 2, 1));
  // training windows span rows 0..(train_end + 1)
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& w : d.train)
    for (std::size_t r = 0; r < w.x.rows(); ++r) {
      sum += w.x.at(r, 0);
      sq += w.x.at(r, 0) * w.x.at(r, 0);
      ++n;
    }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(sq / n == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.test.back().x.at(1, 0) > 2.0);  // later rows fall outside the training range
  CHECK(d.train.front().target == build_windows(ramp(40), 2, 1).front().target);
}

TEST_CASE("constant features get unit scale") {
  FlowgateSeries s = ramp(30, 1, 1);
  for (double& v : s.features) v = 4.0;
  const DatasetSplit d = split_and_normalize(build_windows(s, 2, 1));
  CHECK(d.feature_std[0] == 1.0);
  CHECK(d.train[0].x.at(0, 0) == 0.0);
}

TEST_CASE("timestamps parse and format in UTC") {
  CHECK(csv::parse_timestamp("2020-01-01T00:00:00Z") == 1577836800);
  CHECK(csv::parse_timestamp("2020-03-01T12:30") == 1583065800);
  CHECK(csv::format_timestamp(1583065800) == "2020-03-01T12:30:00Z");
  CHECK_THROWS(csv::parse_timestamp("yesterday"));
}

TEST_CASE("CSV quoting and number formatting") {
  std::ostringstream os;
  csv::write_row(os, {"a", "b,c", "say \"hi\""});
  CHECK(os.str() == "a,\"b,c\",\"say \"\"hi\"\"\"\r\n");
  const auto rows = csv::parse(os.str() + "1,2,3\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0][1] == "b,c");
  CHECK(rows[0][2] == "say \"hi\"");
  CHECK(csv::parse_double(csv::format_double(0.1 + 0.2)) == 0.1 + 0.2);
  CHECK_THROWS(csv::parse_double("1.5x"));
}

TEST_CASE("series CSV round trip is exact") {
  const FlowgateSeries s = ramp(12, 3, 2);
  std::stringstream ss;
  csv::write_series(ss, s);
  const std::string text = ss.str();
  CHECK(text.substr(0, text.find('\r')) == "timestamp,P_1,Ptc_1,P_2,Ptc_2,P_3,Ptc_3,feat_1,feat_2");
  const FlowgateSeries r = csv::read_series(ss);
  CHECK(r.timestamps == s.timestamps);
  CHECK(r.flow == s.flow);
  CHECK(r.capacity == s.capacity);
  CHECK(r.features == s.features);
  CHECK(r.interval_minutes == 15);
}

TEST_CASE("irregular or malformed series are rejected") {
  FlowgateSeries s = ramp(5);
  s.timestamps[3] = csv::format_timestamp(1577836800 + 900 * 10);
  std::stringstream ss;
  csv::write_series(ss, s);
  CHECK_THROWS(csv::read_series(ss));
  FlowgateSeries bad = ramp(5);
  bad.capacity[0] = -1.0;
  CHECK_THROWS(bad.validate());
}
