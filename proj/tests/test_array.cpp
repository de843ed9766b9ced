#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "mel/array.hpp"
#include "mel/io.hpp"
#include "mel/rng.hpp"

namespace {

mel::TwoWayArray two_by_two() {
  mel::TwoWayArray a(2, 2, 1);
  a.at(0, 0) = 1.0;
  a.at(0, 1) = 2.0;
  a.at(1, 0) = 3.0;
  a.at(1, 1) = 4.0;
  return a;
}

}  // namespace

TEST_CASE("full mean of the 2x2 fixture") {
  CHECK(mel::full_mean(two_by_two())[0] == Catch::Approx(2.5));
}

TEST_CASE("constant array mean is the constant") {
  mel::TwoWayArray a(3, 4, 2);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      a.at(i, j, 0) = 7.25;
      a.at(i, j, 1) = -1.5;
    }
  }
  const auto mean = mel::full_mean(a);
  CHECK(mean[0] == Catch::Approx(7.25));
  CHECK(mean[1] == Catch::Approx(-1.5));
}

TEST_CASE("full mean matches the naive loop on random integers") {
  mel::rng::Stream stream(31, mel::rng::make_stream_id(0, 9));
  mel::TwoWayArray a(3, 2, 1);
  double total = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double v = double(int(stream.uniform() * 19) - 9);
      a.at(i, j) = v;
      total += v;
    }
  }
  CHECK(mel::full_mean(a)[0] == total / 6.0);  // exact: small integers
}

TEST_CASE("leave-out means of the 2x2 fixture") {
  const auto a = two_by_two();
  CHECK(mel::leave_out_mean(a, mel::LeaveOutSpec::drop_row(0))[0] == Catch::Approx(3.5));
  CHECK(mel::leave_out_mean(a, mel::LeaveOutSpec::drop_col(0))[0] == Catch::Approx(3.0));
  mel::LeaveOutSpec both;
  both.row = 0;
  both.col = 0;
  CHECK(mel::leave_out_mean(a, both)[0] == Catch::Approx(4.0));
}

TEST_CASE("reconstruction and averaging identities") {
  mel::rng::Stream stream(4242, mel::rng::make_stream_id(0, 9));
  const int N = 5, M = 7;
  mel::TwoWayArray a(N, M, 1);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < M; ++j) a.at(i, j) = stream.normal();
  }
  const double full = mel::full_mean(a)[0];

  for (int l = 0; l < N; ++l) {
    double row_mean = 0.0;
    for (int j = 0; j < M; ++j) row_mean += a.at(l, j);
    row_mean /= M;
    const double loo = mel::leave_out_mean(a, mel::LeaveOutSpec::drop_row(l))[0];
    CHECK(N * M * full ==
          Catch::Approx((N - 1) * M * loo + M * row_mean).margin(1e-10));
  }

  double rows_avg = 0.0, cols_avg = 0.0;
  for (int l = 0; l < N; ++l) {
    rows_avg += mel::leave_out_mean(a, mel::LeaveOutSpec::drop_row(l))[0];
  }
  for (int j = 0; j < M; ++j) {
    cols_avg += mel::leave_out_mean(a, mel::LeaveOutSpec::drop_col(j))[0];
  }
  CHECK(rows_avg / N == Catch::Approx(full).margin(1e-12));
  CHECK(cols_avg / M == Catch::Approx(full).margin(1e-12));
}

TEST_CASE("leave-out views do not modify the source") {
  const auto a = two_by_two();
  const auto before = a.data();
  (void)mel::leave_out_mean(a, mel::LeaveOutSpec::drop_row(1));
  (void)mel::full_mean(a);
  CHECK(a.data() == before);
}

TEST_CASE("three-way leave-out means") {
  mel::ThreeWayArray c(2, 2, 2, 1);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      for (int t = 0; t < 2; ++t) c.at(i, j, t) = 3.25;
    }
  }
  mel::LeaveOutSpec spec;
  spec.row = 1;
  spec.slab = 0;
  CHECK(mel::leave_out_mean(c, spec)[0] == Catch::Approx(3.25));

  // Cells i + j + t (1-based): leaving i = 1 keeps the i = 2 slab.
  mel::ThreeWayArray d(2, 2, 2, 1);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      for (int t = 0; t < 2; ++t) d.at(i, j, t) = (i + 1) + (j + 1) + (t + 1);
    }
  }
  CHECK(mel::leave_out_mean(d, mel::LeaveOutSpec::drop_row(0))[0] ==
        Catch::Approx(2.0 + 3.0));  // 2 + mean(j + t), j,t in {1,2}

  // Naive oracle over every single/pair/triple spec on enumerated values.
  mel::ThreeWayArray e(2, 2, 2, 1);
  int counter = 0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      for (int t = 0; t < 2; ++t) e.at(i, j, t) = (counter++) * (counter % 3) - 2.0;
    }
  }
  auto naive = [&](const mel::LeaveOutSpec& spec3) {
    double sum = 0.0;
    int kept = 0;
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        for (int t = 0; t < 2; ++t) {
          if (i == spec3.row || j == spec3.col || t == spec3.slab) continue;
          sum += e.at(i, j, t);
          ++kept;
        }
      }
    }
    return sum / kept;
  };
  for (int ri = -1; ri < 2; ++ri) {
    for (int cj = -1; cj < 2; ++cj) {
      for (int st = -1; st < 2; ++st) {
        if (ri < 0 && cj < 0 && st < 0) continue;
        mel::LeaveOutSpec spec3;
        spec3.row = ri;
        spec3.col = cj;
        spec3.slab = st;
        CHECK(mel::leave_out_mean(e, spec3)[0] == Catch::Approx(naive(spec3)));
      }
    }
  }
}

TEST_CASE("csv round trip and validation") {
  const auto a = two_by_two();
  std::stringstream buffer;
  mel::write_two_way_csv(buffer, a);
  const auto back = mel::read_two_way_csv(buffer);
  REQUIRE(back.rows() == 2);
  REQUIRE(back.cols() == 2);
  CHECK(back.at(1, 0) == 3.0);

  std::stringstream missing("i,j,v1\n1,1,1\n1,2,2\n2,1,3\n");
  CHECK_THROWS_AS(mel::read_two_way_csv(missing), mel::DataError);

  std::stringstream duplicate("i,j,v1\n1,1,1\n1,1,2\n");
  CHECK_THROWS_AS(mel::read_two_way_csv(duplicate), mel::DataError);

  std::stringstream bad_header("a,b,c\n1,1,1\n");
  CHECK_THROWS_AS(mel::read_two_way_csv(bad_header), mel::DataError);

  std::stringstream bad_number("i,j,v1\n1,1,zap\n");
  try {
    mel::read_two_way_csv(bad_number);
    FAIL("expected DataError");
  } catch (const mel::DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("three-way csv round trip") {
  mel::ThreeWayArray c(2, 3, 2, 2);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int t = 0; t < 2; ++t) {
        c.at(i, j, t, 0) = i + 10.0 * j + 100.0 * t;
        c.at(i, j, t, 1) = -double(i * j * t);
      }
    }
  }
  std::stringstream buffer;
  mel::write_three_way_csv(buffer, c);
  const auto back = mel::read_three_way_csv(buffer);
  REQUIRE(back.slabs() == 2);
  REQUIRE(back.dim() == 2);
  CHECK(back.at(1, 2, 1, 0) == 121.0);
  CHECK(back.at(1, 2, 1, 1) == -2.0);
}
