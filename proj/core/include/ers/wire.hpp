#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "ers/model.hpp"

namespace ers::wire {

using NodeId = std::string;

/// Wire message kinds. Replication rounds use three request/response
/// exchanges: changes (offer/poll), diff (want/missing) and bulk
/// (docs/ack). The remaining kinds carry discovery-independent traffic:
/// change-feed subscriptions, entity bootstrap fetches and remote search.
enum class Kind {
  ChangesRequest,
  ChangesResponse,
  DiffRequest,
  DiffResponse,
  BulkRequest,
  BulkResponse,
  CommitRequest,
  CommitResponse,
  SubscribeRequest,
  SubscribeResponse,
  ChangeNotify,
  EntityFetchRequest,
  EntityFetchResponse,
  SearchRequest,
  SearchResponse,
};

std::string_view to_string(Kind kind);

/// Envelope for every simulated network message. The payload digest covers
/// the canonical body dump; receivers recompute it and silently discard
/// mismatches, which makes corruption equivalent to loss at the protocol
/// layer.
struct Message {
  Kind kind = Kind::ChangeNotify;
  NodeId src;
  NodeId dst;
  std::uint64_t req_id = 0;  // response carries the request's id
  std::string link;          // link identity, "-" for link-less traffic
  int flow = -1;             // flow index within the link
  std::uint64_t attempt = 0; // round attempt, for stale-response rejection
  nlohmann::json body;

  std::string body_digest() const;
  bool digest_ok() const;
  void seal();  // computes and stores the payload digest

  std::string digest;  // 32 hex chars, set by seal()
};

bool is_request(Kind kind);

}  // namespace ers::wire
