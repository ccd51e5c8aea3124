#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "statemat/network.hpp"
#include "test_support.hpp"

using namespace statemat;
using statemat::testing::source_path;

namespace {

BusNetwork two_bus(double r, double x) {
  BusNetwork net;
  net.buses = {{1, BusKind::Other}, {2, BusKind::Other}};
  net.branches = {{"a", 1, 2, r, x, 0.0, 0.0, true}};
  return net;
}

// Y = A^T diag(y) A + shunts with a branch-by-bus incidence matrix whose
// from-side entry carries 1/tap.
CMat incidence_oracle(const BusNetwork& net) {
  const auto nb = static_cast<Eigen::Index>(net.buses.size());
  std::vector<const Branch*> live;
  for (const auto& br : net.branches) {
    if (br.in_service) live.push_back(&br);
  }
  const auto nl = static_cast<Eigen::Index>(live.size());
  CMat a = CMat::Zero(nl, nb);
  CVec y(nl);
  CVec shunt = CVec::Zero(nb);
  for (Eigen::Index k = 0; k < nl; ++k) {
    const Branch& br = *live[static_cast<std::size_t>(k)];
    const double t = br.tap == 0.0 ? 1.0 : br.tap;
    const auto f = static_cast<Eigen::Index>(net.bus_index(br.from));
    const auto to = static_cast<Eigen::Index>(net.bus_index(br.to));
    a(k, f) = 1.0 / t;
    a(k, to) = -1.0;
    y(k) = 1.0 / Complex(br.r, br.x);
    shunt(f) += Complex(0.0, br.b_shunt / 2.0) / (t * t);
    shunt(to) += Complex(0.0, br.b_shunt / 2.0);
  }
  for (const auto& ld : net.loads) {
    shunt(static_cast<Eigen::Index>(net.bus_index(ld.bus))) +=
        Complex(ld.p, -ld.q) / (ld.v_nom * ld.v_nom);
  }
  CMat out = a.transpose() * y.asDiagonal() * a;
  out += shunt.asDiagonal();
  return out;
}

CMat schur_oracle(const CMat& y, Eigen::Index ng) {
  const Eigen::Index nl = y.rows() - ng;
  const CMat ygg = y.topLeftCorner(ng, ng);
  const CMat ygl = y.topRightCorner(ng, nl);
  const CMat ylg = y.bottomLeftCorner(nl, ng);
  const CMat yll = y.bottomRightCorner(nl, nl);
  return ygg - ygl * yll.inverse() * ylg;
}

CMat reduced_y(const ReducedNetwork& r) {
  CMat y(r.g.rows(), r.g.cols());
  y.real() = r.g;
  y.imag() = r.b;
  return y;
}

}  // namespace

TEST(BuildAdmittance, SingleLosslessBranch) {
  const CMat y = build_admittance(two_bus(0.0, 0.5));
  EXPECT_NEAR(std::abs(y(0, 0) - Complex(0, -2)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(y(0, 1) - Complex(0, 2)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(y(1, 0) - Complex(0, 2)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(y(1, 1) - Complex(0, -2)), 0.0, 1e-15);
}

TEST(BuildAdmittance, NoBranchesLeavesOnlyLoadShunts) {
  BusNetwork net;
  net.buses = {{1, BusKind::Other}, {2, BusKind::Other}};
  net.loads = {{2, 1.0, 0.5, 1.0}};
  const CMat y = build_admittance(net);
  EXPECT_EQ(y(0, 0), Complex(0, 0));
  EXPECT_EQ(y(0, 1), Complex(0, 0));
  EXPECT_NEAR(std::abs(y(1, 1) - Complex(1.0, -0.5)), 0.0, 1e-15);
}

TEST(BuildAdmittance, ZeroImpedanceIsSingularBranch) {
  try {
    build_admittance(two_bus(0.0, 0.0));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularBranch);
  }
}

TEST(BuildAdmittance, ParallelCircuitsSum) {
  BusNetwork net = two_bus(0.0, 0.5);
  net.branches.push_back({"a", 1, 2, 0.0, 0.5, 0.0, 0.0, true});
  const CMat y = build_admittance(net);
  EXPECT_NEAR(std::abs(y(0, 1) - Complex(0, 4)), 0.0, 1e-14);
}

TEST(BuildAdmittance, MatchesIncidenceOracleOnShippedCases) {
  for (const char* file : {"data/wscc9.json", "data/ieee39.json"}) {
    const auto c = load_network_case(source_path(file));
    const CMat y = build_admittance(c.network);
    const CMat oracle = incidence_oracle(c.network);
    EXPECT_LE((y - oracle).norm(), 1e-12 * oracle.norm()) << file;
    EXPECT_LE((y - y.transpose()).cwiseAbs().maxCoeff(), 1e-12) << file;
  }
}

TEST(KronReduce, NothingToEliminateIsIdentity) {
  const CMat y = build_admittance(two_bus(0.01, 0.5));
  const auto r = kron_reduce(y, {0, 1});
  EXPECT_LE((reduced_y(r) - y).norm(), 1e-15);
}

TEST(KronReduce, ThreeNodeStarByHand) {
  // Generators at 1 and 2 tied through y1 = -2j and y2 = -4j to node 3,
  // which carries a shunt of 1.
  const Complex y1(0, -2), y2(0, -4), yl(1, 0);
  CMat y = CMat::Zero(3, 3);
  y(0, 0) = y1;
  y(1, 1) = y2;
  y(2, 2) = y1 + y2 + yl;
  y(0, 2) = y(2, 0) = -y1;
  y(1, 2) = y(2, 1) = -y2;
  const auto r = kron_reduce(y, {0, 1});
  const Complex d = y1 + y2 + yl;
  const Complex e11 = y1 - y1 * y1 / d;
  const Complex e12 = -y1 * y2 / d;
  const Complex e22 = y2 - y2 * y2 / d;
  const CMat red = reduced_y(r);
  EXPECT_NEAR(std::abs(red(0, 0) - e11), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(red(0, 1) - e12), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(red(1, 0) - e12), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(red(1, 1) - e22), 0.0, 1e-14);
  EXPECT_NEAR(r.phi(0), std::atan2(r.b(0, 0), r.g(0, 0)), 0.0);
}

TEST(KronReduce, MatchesDenseSchurOracle) {
  const auto c = load_network_case(source_path("data/ieee39.json"));
  // Internal generator nodes appended by hand, placed first for the oracle.
  BusNetwork net = c.network;
  const std::size_t nb = net.buses.size();
  for (const auto& g : c.network.generators) {
    net.buses.push_back({1000 + g.id, BusKind::GeneratorInternal});
    net.branches.push_back({"x" + std::to_string(g.id), 1000 + g.id, g.bus, 0.0,
                            g.xd_prime, 0.0, 0.0, true});
  }
  const CMat y = build_admittance(net);
  const auto ng = static_cast<Eigen::Index>(c.network.generators.size());
  std::vector<Eigen::Index> order;
  for (Eigen::Index k = 0; k < ng; ++k) order.push_back(static_cast<Eigen::Index>(nb) + k);
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(nb); ++k) order.push_back(k);
  const CMat permuted = y(order, order);
  std::vector<std::size_t> internal(static_cast<std::size_t>(ng));
  std::iota(internal.begin(), internal.end(), 0);
  const CMat red = reduced_y(kron_reduce(permuted, internal));
  const CMat oracle = schur_oracle(permuted, ng);
  EXPECT_LE((red - oracle).norm(), 1e-10 * red.norm());
  EXPECT_LE((red.real() - red.real().transpose()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(KronReduce, Trip22To23ChangesGenerators6And7Most) {
  const auto c = load_network_case(source_path("data/ieee39.json"));
  const auto pre = reduce_to_generators(c.network, c.operating_point);
  const auto post = reduce_with_emf(apply_branch_outage(c.network, "22-23"), pre.reduced.e);
  const CMat delta = reduced_y(post) - reduced_y(pre.reduced);
  std::vector<std::pair<double, int>> rows;
  for (Eigen::Index i = 0; i < delta.rows(); ++i) {
    rows.push_back({delta.row(i).norm(), c.network.generators[static_cast<std::size_t>(i)].id});
  }
  std::sort(rows.rbegin(), rows.rend());
  std::vector<int> top = {rows[0].second, rows[1].second};
  std::sort(top.begin(), top.end());
  EXPECT_EQ(top, (std::vector<int>{6, 7}));
}

TEST(BranchOutage, EqualsNetworkWithoutTheBranch) {
  const auto c = load_network_case(source_path("data/wscc9.json"));
  const BusNetwork tripped = apply_branch_outage(c.network, "5-7");
  BusNetwork removed = c.network;
  removed.branches.erase(std::remove_if(removed.branches.begin(), removed.branches.end(),
                                        [](const Branch& b) { return b.id == "5-7"; }),
                         removed.branches.end());
  EXPECT_EQ(build_admittance(tripped), build_admittance(removed));
  EXPECT_TRUE(c.network.find_branch("5-7")->in_service);
}

TEST(BranchOutage, UnknownAndAlreadyTripped) {
  const BusNetwork net = two_bus(0.0, 0.5);
  try {
    apply_branch_outage(net, "nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownBranch);
  }
  const BusNetwork once = apply_branch_outage(net, "a");
  try {
    apply_branch_outage(once, "a");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BranchOutOfService);
  }
}

TEST(BranchOutage, BridgeTripIslandsLoadBus) {
  // Chain 1-2-3-4 with generators on 1 and 2 and a load on 4.
  BusNetwork net;
  for (int id = 1; id <= 4; ++id) net.buses.push_back({id, BusKind::Other});
  net.branches = {{"1-2", 1, 2, 0.01, 0.1, 0.0, 0.0, true},
                  {"2-3", 2, 3, 0.01, 0.1, 0.0, 0.0, true},
                  {"3-4", 3, 4, 0.01, 0.1, 0.0, 0.0, true}};
  net.loads = {{4, 0.5, 0.1, 1.0}, {3, 0.2, 0.0, 1.0}};
  net.generators = {{1, 1, 0.2}, {2, 2, 0.3}};
  const Vec e = Vec::Ones(2);
  EXPECT_NO_THROW(reduce_with_emf(net, e));
  try {
    reduce_with_emf(apply_branch_outage(net, "3-4"), e);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::Islanded);
    EXPECT_NE(std::string(err.what()).find("islanded or degenerate network"), std::string::npos);
  }
}

TEST(KronReduce, SingularEliminatedBlockIsIslanded) {
  CMat y = CMat::Zero(3, 3);
  y(0, 0) = Complex(0, -2);
  y(1, 1) = Complex(0, -2);
  try {
    kron_reduce(y, {0, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Islanded);
  }
}

TEST(InternalEmf, NoCurrent) {
  const auto e = compute_internal_emf(std::polar(1.05, 0.3), 0.0, 0.0, 0.25);
  EXPECT_NEAR(e.magnitude, 1.05, 1e-15);
  EXPECT_NEAR(e.angle, 0.3, 1e-15);
}

TEST(InternalEmf, ActivePowerOnly) {
  const auto e = compute_internal_emf(Complex(1, 0), 1.0, 0.0, 0.3);
  EXPECT_NEAR(e.magnitude, std::sqrt(1.09), 1e-12);
  EXPECT_NEAR(e.magnitude, 1.0440, 1e-4);
  EXPECT_NEAR(e.angle, std::atan(0.3), 1e-12);
  EXPECT_NEAR(e.angle, 0.2915, 1e-4);
}

TEST(InternalEmf, ReactivePowerOnly) {
  const auto e = compute_internal_emf(Complex(1, 0), 0.0, 1.0, 0.2);
  EXPECT_NEAR(e.magnitude, 1.2, 1e-14);
  EXPECT_NEAR(e.angle, 0.0, 1e-14);
}

TEST(Reduction, WsccMatchesClassicReducedMatrix) {
  const auto c = load_network_case(source_path("data/wscc9.json"));
  const auto r = reduce_to_generators(c.network, c.operating_point);
  // Anderson-Fouad reduced admittance, 3 decimals.
  const Mat g_ref = (Mat(3, 3) << 0.845, 0.287, 0.210, 0.287, 0.420, 0.213, 0.210, 0.213,
                     0.277).finished();
  const Mat b_ref = (Mat(3, 3) << -2.988, 1.513, 1.226, 1.513, -2.724, 1.088, 1.226, 1.088,
                     -2.368).finished();
  EXPECT_LE((r.reduced.g - g_ref).cwiseAbs().maxCoeff(), 1.5e-3);
  EXPECT_LE((r.reduced.b - b_ref).cwiseAbs().maxCoeff(), 1.5e-3);
  EXPECT_NEAR(r.reduced.e(0), 1.0566, 1e-3);
  EXPECT_NEAR(r.reduced.e(1), 1.0502, 1e-3);
  EXPECT_NEAR(r.reduced.e(2), 1.0170, 1e-3);
}
