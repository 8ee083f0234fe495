#include "ers/wire.hpp"

#include "ers/digest.hpp"

namespace ers::wire {

std::string_view to_string(Kind kind) {
  switch (kind) {
    case Kind::ChangesRequest: return "changes_req";
    case Kind::ChangesResponse: return "changes_resp";
    case Kind::DiffRequest: return "diff_req";
    case Kind::DiffResponse: return "diff_resp";
    case Kind::BulkRequest: return "bulk_req";
    case Kind::BulkResponse: return "bulk_resp";
    case Kind::CommitRequest: return "commit_req";
    case Kind::CommitResponse: return "commit_resp";
    case Kind::SubscribeRequest: return "subscribe_req";
    case Kind::SubscribeResponse: return "subscribe_resp";
    case Kind::ChangeNotify: return "change_notify";
    case Kind::EntityFetchRequest: return "entity_fetch_req";
    case Kind::EntityFetchResponse: return "entity_fetch_resp";
    case Kind::SearchRequest: return "search_req";
    case Kind::SearchResponse: return "search_resp";
  }
  return "unknown";
}

std::string Message::body_digest() const { return fingerprint_hex(body.dump()); }

bool Message::digest_ok() const { return digest == body_digest(); }

void Message::seal() { digest = body_digest(); }

bool is_request(Kind kind) {
  switch (kind) {
    case Kind::ChangesRequest:
    case Kind::DiffRequest:
    case Kind::BulkRequest:
    case Kind::CommitRequest:
    case Kind::SubscribeRequest:
    case Kind::EntityFetchRequest:
    case Kind::SearchRequest:
      return true;
    default:
      return false;
  }
}

}  // namespace ers::wire
