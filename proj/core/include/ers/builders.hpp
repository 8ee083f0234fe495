#pragma once

#include <string>

#include "ers/scenario.hpp"

namespace ers::harness {

/// Two nodes on one LAN: node2 authors an entity, node1 caches it, loses
/// connectivity, node2 deletes the entity, node1 reconnects and converges
/// to the deletion while its own public data stays untouched.
Scenario make_simple();

struct ConferenceParams {
  int attendees = 30;
  bool with_bridge = true;
  int endorsements_per_node = 4;
  std::uint64_t workload_seed = 7;
  bool chaos = false;
};

/// A conference hall: one static bridge plus N attendee laptops. Every
/// attendee carries a public profile tagged ers:ConferenceAttendee, finds
/// the others through a remote search, caches the results and endorses
/// random peers. The chaos variant keeps killing and restarting nodes for
/// ten simulated minutes, then must still converge.
Scenario make_conference(const ConferenceParams& params = {});

struct TruckParams {
  int laps = 3;
  int villages = 6;
  net::SimTime dwell_ms = 5000;
  net::SimTime travel_ms = 2000;
};

/// Six isolated villages, one shop each, and a mobile bridge on a truck
/// cycling through them clockwise with five-second stops. Village price
/// lists spread truck-hop by truck-hop; shop1 revises its prices before
/// the final lap.
Scenario make_truck(const TruckParams& params = {});

/// A competing vendor writes statements about another shop's entity. The
/// two documents never merge: a document-level cacher keeps seeing only
/// the original author's document, an entity-level cacher receives both.
Scenario make_competing_writers();

struct CompetingWriterOutcome {
  bool pass = false;
  std::string detail;
};

/// Runs make_competing_writers and folds its assertions into one verdict.
CompetingWriterOutcome competing_writer_check();

}  // namespace ers::harness
