#include "ecmirror/coordinator.hpp"

#include <algorithm>
#include <sstream>

#include "ecmirror/edge.hpp"
#include "ecmirror/errors.hpp"
#include "ecmirror/glare.hpp"
#include "ecmirror/model_io.hpp"
#include "ecmirror/protocol.hpp"

namespace ecmirror {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kBootstrapFile = "bootstrap.json";
constexpr const char* kEventsFile = "events.log";
constexpr const char* kVersionsFile = "versions.log";

std::int64_t wall_clock_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::vector<json> read_json_lines(const fs::path& path) {
  std::vector<json> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  for (const auto& l : lines) {
    ++line_no;
    if (l.empty()) continue;
    json j = json::parse(l, nullptr, false);
    if (j.is_discarded()) {
      // A torn final record from an interrupted write is dropped.
      if (line_no == lines.size()) break;
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": unparsable record");
    }
    out.push_back(std::move(j));
  }
  return out;
}

struct StoredBootstrap {
  EnsembleModel model;
  FederationConfig federation;
};

StoredBootstrap read_bootstrap(const fs::path& dir) {
  std::ifstream in(dir / kBootstrapFile);
  if (!in) throw FormatError("cannot open " + (dir / kBootstrapFile).string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw FormatError((dir / kBootstrapFile).string() + ": not a JSON object");
  }
  try {
    return {model_from_json(doc.at("ensemble")), federation_config_from_json(doc.at("federation"))};
  } catch (const json::exception& e) {
    throw FormatError((dir / kBootstrapFile).string() + ": " + e.what());
  } catch (const ProtocolError& e) {
    throw FormatError((dir / kBootstrapFile).string() + ": " + e.what());
  }
}

bool same_config(const FederationConfig& a, const FederationConfig& b) {
  return a.decay == b.decay && a.correction == b.correction && a.quorum == b.quorum;
}

EnsembleModel resolve_bootstrap(EnsembleModel given, const ServiceConfig& cfg) {
  if (cfg.data_dir.empty() || !fs::exists(cfg.data_dir / kBootstrapFile)) return given;
  StoredBootstrap stored = read_bootstrap(cfg.data_dir);
  if (!same_config(stored.federation, cfg.federation)) {
    throw FormatError("data directory " + cfg.data_dir.string() +
                      " was created with different federation settings");
  }
  return std::move(stored.model);
}

// Applies one logged event. Registry side effects go to `records` when given.
void apply_event(const json& ev, Federation& fed, std::map<std::string, NodeRecord>* records,
                 std::vector<GlobalModel>* published) {
  const std::string kind = ev.at("ev").get<std::string>();
  const std::int64_t ts = ev.at("ts").get<std::int64_t>();
  if (kind == "register") {
    const std::string id = ev.at("node_id").get<std::string>();
    fed.register_node(id);
    if (records != nullptr && !records->contains(id)) {
      NodeRecord r;
      r.node_id = id;
      r.registered_at_ms = ts;
      r.last_seen_ms = ts;
      records->emplace(id, std::move(r));
    }
  } else if (kind == "push") {
    NodeUpdate u = update_from_json(ev.at("update"));
    if (records != nullptr) {
      auto& r = records->at(u.node_id);
      r.uploaded_usage += u.usage_count;
      r.pushes += 1;
      r.last_seen_ms = ts;
    }
    fed.submit(std::move(u));
  } else if (kind == "round") {
    const RoundResult result = fed.run_round(ts);
    if (published != nullptr && result.status == RoundResult::Status::Published) {
      published->push_back(*result.model);
    }
  } else {
    throw FormatError("unknown event '" + kind + "'");
  }
}

const json& require_object(const json& payload) {
  if (!payload.is_object()) throw ProtocolError("payload must be an object");
  return payload;
}

std::string node_id_of(const json& payload) {
  auto it = payload.find("node_id");
  if (it == payload.end() || !it->is_string()) throw ProtocolError("missing string 'node_id'");
  return it->get<std::string>();
}

}  // namespace

bool valid_node_id(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '.' || c == '-';
  });
}

Coordinator::Coordinator(EnsembleModel bootstrap, ServiceConfig cfg, Clock clock)
    : bootstrap_(resolve_bootstrap(std::move(bootstrap), cfg)),
      cfg_(std::move(cfg)),
      clock_(clock ? std::move(clock) : Clock(wall_clock_ms)),
      federation_(cfg_.federation, extract_params(bootstrap_)) {
  if (cfg_.period.count() <= 0) throw DomainError("round period must be positive");
  started_ms_ = clock_();
  if (cfg_.data_dir.empty()) return;

  fs::create_directories(cfg_.data_dir);
  const bool existing = fs::exists(cfg_.data_dir / kBootstrapFile);
  if (existing) {
    restore();
    events_.open(cfg_.data_dir / kEventsFile, std::ios::app | std::ios::binary);
    versions_.open(cfg_.data_dir / kVersionsFile, std::ios::app | std::ios::binary);
  } else {
    {
      std::ofstream out(cfg_.data_dir / kBootstrapFile, std::ios::trunc | std::ios::binary);
      json doc = {{"format", "ecmirror.service-bootstrap"},
                  {"federation", to_json(cfg_.federation)},
                  {"ensemble", model_to_json(bootstrap_)}};
      out << doc.dump() << '\n';
      if (!out) throw FormatError("cannot write " + (cfg_.data_dir / kBootstrapFile).string());
    }
    events_.open(cfg_.data_dir / kEventsFile, std::ios::trunc | std::ios::binary);
    versions_.open(cfg_.data_dir / kVersionsFile, std::ios::trunc | std::ios::binary);
    append_version(*federation_.current());
  }
  if (!events_ || !versions_) throw FormatError("cannot open logs in " + cfg_.data_dir.string());
}

void Coordinator::restore() {
  std::vector<GlobalModel> published{*federation_.current()};
  for (const auto& ev : read_json_lines(cfg_.data_dir / kEventsFile)) {
    apply_event(ev, federation_, &records_, &published);
    if (ev.at("ev") == "round") {
      ++rounds_attempted_;
      last_round_ms_ = ev.at("ts").get<std::int64_t>();
    }
  }
  // Versions published but not yet persisted (interrupted run) are appended.
  const auto persisted = read_json_lines(cfg_.data_dir / kVersionsFile);
  if (persisted.size() > published.size()) {
    throw FormatError("versions.log is ahead of events.log in " + cfg_.data_dir.string());
  }
  for (std::size_t i = 0; i < persisted.size(); ++i) {
    if (persisted[i] != to_json(published[i])) {
      throw FormatError("versions.log disagrees with the replayed events at version " +
                        std::to_string(i));
    }
  }
  versions_.open(cfg_.data_dir / kVersionsFile, std::ios::app | std::ios::binary);
  for (std::size_t i = persisted.size(); i < published.size(); ++i) append_version(published[i]);
  versions_.close();
}

void Coordinator::append_event(const json& record) {
  if (!events_.is_open()) return;
  events_ << record.dump() << '\n';
  events_.flush();
}

void Coordinator::append_version(const GlobalModel& model) {
  if (!versions_.is_open()) return;
  versions_ << to_json(model).dump() << '\n';
  versions_.flush();
}

std::string Coordinator::handle_payload(std::string_view payload) {
  json request = json::parse(payload, nullptr, false);
  if (request.is_discarded()) return make_error(nullptr, "malformed", "payload is not JSON").dump();
  return handle(request).dump();
}

json Coordinator::handle(const json& request) {
  json id = nullptr;
  try {
    if (!request.is_object()) return make_error(id, "malformed", "request must be an object");
    if (auto it = request.find("id"); it != request.end()) id = *it;
    auto type = request.find("type");
    if (type == request.end() || !type->is_string()) {
      return make_error(id, "malformed", "missing string 'type'");
    }
    auto version = request.find("version");
    if (version == request.end() || !version->is_number_integer()) {
      return make_error(id, "malformed", "missing integer 'version'");
    }
    if (version->get<std::int64_t>() != kProtocolVersion) {
      return make_error(id, "unsupported_version",
                        "server speaks protocol version " + std::to_string(kProtocolVersion));
    }
    auto payload = request.find("payload");
    const json empty = json::object();
    return dispatch(type->get<std::string>(), id, payload == request.end() ? empty : *payload);
  } catch (const ProtocolError& e) {
    return make_error(id, "malformed", e.what());
  } catch (const json::exception& e) {
    return make_error(id, "malformed", e.what());
  } catch (const DomainError& e) {
    return make_error(id, "invalid_argument", e.what());
  } catch (const std::exception& e) {
    return make_error(id, "internal", e.what());
  }
}

json Coordinator::dispatch(const std::string& type, const json& id, const json& payload) {
  if (type == "register") return on_register(id, require_object(payload));
  if (type == "push_update") return on_push(id, require_object(payload));
  if (type == "pull_model") return on_pull(id, require_object(payload));
  if (type == "status") return make_response("status", id, status());
  if (type == "report") return on_report(id, require_object(payload));
  if (type == "command") return on_command(id, require_object(payload));
  return make_error(id, "unknown_type", "unknown message type '" + type + "'");
}

json Coordinator::on_register(const json& id, const json& payload) {
  const std::string node = node_id_of(payload);
  if (!valid_node_id(node)) {
    return make_error(id, "invalid_node_id", "node id must be 1-64 characters of [A-Za-z0-9_.-]");
  }
  std::lock_guard lock(mu_);
  const std::int64_t now = clock_();
  const bool fresh = !records_.contains(node);
  if (fresh) {
    federation_.register_node(node);
    NodeRecord r;
    r.node_id = node;
    r.registered_at_ms = now;
    records_.emplace(node, std::move(r));
    append_event({{"ev", "register"}, {"ts", now}, {"node_id", node}});
  }
  records_.at(node).last_seen_ms = now;
  return make_response("ack", id,
                       {{"node_id", node},
                        {"registered", fresh},
                        {"model_version", federation_.current()->version},
                        {"schema", schema_to_hex(federation_.schema())},
                        {"nodes", records_.size()}});
}

json Coordinator::on_push(const json& id, const json& payload) {
  auto it = payload.find("update");
  NodeUpdate update = update_from_json(it == payload.end() ? payload : *it);
  std::lock_guard lock(mu_);
  auto rec = records_.find(update.node_id);
  if (rec == records_.end()) {
    return make_error(id, "unregistered", "node '" + update.node_id + "' is not registered");
  }
  try {
    federation_.submit(update);
  } catch (const SchemaMismatch& e) {
    json err = make_error(id, "schema_mismatch", e.what());
    err["payload"]["expected_schema"] = schema_to_hex(e.expected());
    return err;
  } catch (const DomainError& e) {
    return make_error(id, "invalid_update", e.what());
  }
  const std::int64_t now = clock_();
  append_event({{"ev", "push"}, {"ts", now}, {"update", to_json(update)}});
  NodeRecord& r = rec->second;
  r.uploaded_usage += update.usage_count;
  r.unsent_usage = 0;
  r.pushes += 1;
  r.last_seen_ms = now;
  return make_response("ack", id,
                       {{"queued", true},
                        {"pending", federation_.pending()},
                        {"model_version", federation_.current()->version},
                        {"staleness", federation_.staleness(update.node_id)}});
}

json Coordinator::on_pull(const json& id, const json& payload) {
  const std::string node = node_id_of(payload);
  const bool full = payload.contains("full") && payload.at("full").is_boolean() &&
                    payload.at("full").get<bool>();
  std::shared_ptr<const GlobalModel> model;
  {
    std::lock_guard lock(mu_);
    auto rec = records_.find(node);
    if (rec == records_.end()) {
      return make_error(id, "unregistered", "node '" + node + "' is not registered");
    }
    rec->second.last_seen_ms = clock_();
    model = federation_.current();
  }
  const bool is_bootstrap = model->version == 0;
  json out = {{"bootstrap", is_bootstrap}, {"model", to_json(*model)}};
  if (is_bootstrap || full) out["ensemble"] = model_to_json(apply_params(bootstrap_, model->params));
  return make_response("model", id, std::move(out));
}

json Coordinator::on_report(const json& id, const json& payload) {
  const std::string node = node_id_of(payload);
  std::lock_guard lock(mu_);
  auto rec = records_.find(node);
  if (rec == records_.end()) {
    return make_error(id, "unregistered", "node '" + node + "' is not registered");
  }
  NodeRecord r = rec->second;
  if (auto m = payload.find("mode"); m != payload.end()) {
    r.mode = std::string(to_string(mode_from_string(m->get<std::string>())));
  }
  if (auto t = payload.find("tap"); t != payload.end()) {
    r.tap = VoltageCommand::from_tap(t->get<int>()).tap();
  }
  if (auto t = payload.find("transmittance"); t != payload.end()) r.transmittance = t->get<double>();
  if (auto s = payload.find("score"); s != payload.end()) r.score = s->get<double>();
  if (auto s = payload.find("rating"); s != payload.end()) r.rating = s->get<int>();
  if (auto u = payload.find("usage_count"); u != payload.end()) {
    r.unsent_usage = u->get<std::uint64_t>();
  }
  r.last_seen_ms = clock_();
  rec->second = std::move(r);

  json commands = json::array();
  auto& queue = commands_[node];
  while (!queue.empty()) {
    commands.push_back(std::move(queue.front()));
    queue.pop_front();
  }
  return make_response("ack", id, {{"commands", std::move(commands)},
                                   {"model_version", federation_.current()->version}});
}

json Coordinator::on_command(const json& id, const json& payload) {
  const std::string node = node_id_of(payload);
  auto action = payload.find("action");
  if (action == payload.end() || !action->is_string()) {
    throw ProtocolError("missing string 'action'");
  }
  json cmd;
  if (*action == "set_mode") {
    auto m = payload.find("mode");
    if (m == payload.end() || !m->is_string()) throw ProtocolError("missing string 'mode'");
    try {
      cmd = {{"action", "set_mode"}, {"mode", to_string(mode_from_string(m->get<std::string>()))}};
    } catch (const DomainError& e) {
      return make_error(id, "invalid_command", e.what());
    }
  } else if (*action == "manual_tap") {
    auto t = payload.find("tap");
    if (t == payload.end() || !t->is_number_integer()) throw ProtocolError("missing integer 'tap'");
    const auto tap = t->get<std::int64_t>();
    if (tap < 0 || tap > kMaxTap) {
      return make_error(id, "invalid_command", "tap must be within 0..127");
    }
    cmd = {{"action", "manual_tap"}, {"tap", tap}};
  } else {
    return make_error(id, "invalid_command", "unknown action '" + action->get<std::string>() + "'");
  }
  std::lock_guard lock(mu_);
  if (!records_.contains(node)) {
    return make_error(id, "unregistered", "node '" + node + "' is not registered");
  }
  auto& queue = commands_[node];
  queue.push_back(std::move(cmd));
  return make_response("ack", id, {{"queued", queue.size()}});
}

RoundResult Coordinator::run_round() {
  std::lock_guard lock(mu_);
  return round_locked(std::max(clock_(), last_round_ms_ + 1));
}

RoundResult Coordinator::round_locked(std::int64_t ts) {
  RoundResult result = federation_.run_round(ts);
  ++rounds_attempted_;
  last_round_ms_ = ts;
  last_round_status_ = std::string(to_string(result.status));
  // Skipped rounds change nothing, so only effective ones are logged.
  if (result.status != RoundResult::Status::BelowQuorum) {
    append_event({{"ev", "round"}, {"ts", ts}});
  }
  if (result.status == RoundResult::Status::Published) append_version(*result.model);
  return result;
}

json Coordinator::status() const {
  std::lock_guard lock(mu_);
  return status_locked();
}

json Coordinator::status_locked() const {
  const auto model = federation_.current();
  json nodes = json::array();
  for (const auto& [id, r] : records_) {
    nodes.push_back({{"node_id", id},
                     {"registered_at_ms", r.registered_at_ms},
                     {"last_seen_ms", r.last_seen_ms},
                     {"staleness", federation_.staleness(id)},
                     {"mode", r.mode},
                     {"tap", r.tap},
                     {"volts", tap_to_volts(r.tap)},
                     {"transmittance", r.transmittance},
                     {"score", r.score},
                     {"rating", r.rating},
                     {"category", to_string(category_for_rating(r.rating))},
                     {"usage_count", r.usage_count()},
                     {"pushes", r.pushes}});
  }
  const std::int64_t anchor = rounds_attempted_ > 0 ? last_round_ms_ : started_ms_;
  return {{"version", model->version},
          {"bootstrap", model->version == 0},
          {"model_created_at_ms", model->created_at_ms},
          {"schema", schema_to_hex(model->params.schema)},
          {"pending", federation_.pending()},
          {"nodes", std::move(nodes)},
          {"schedule",
           {{"period_ms", cfg_.period.count()},
            {"rounds_attempted", rounds_attempted_},
            {"last_round_ms", last_round_ms_},
            {"last_status", last_round_status_},
            {"next_round_ms", anchor + cfg_.period.count()}}},
          {"config", to_json(cfg_.federation)}};
}

std::shared_ptr<const GlobalModel> Coordinator::current() const {
  std::lock_guard lock(mu_);
  return federation_.current();
}

std::size_t Coordinator::node_count() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::uint64_t Coordinator::rounds_attempted() const {
  std::lock_guard lock(mu_);
  return rounds_attempted_;
}

std::vector<GlobalModel> Coordinator::replay(const fs::path& data_dir) {
  StoredBootstrap stored = read_bootstrap(data_dir);
  Federation fed(stored.federation, extract_params(stored.model));
  std::vector<GlobalModel> published{*fed.current()};
  for (const auto& ev : read_json_lines(data_dir / kEventsFile)) {
    apply_event(ev, fed, nullptr, &published);
  }
  return published;
}

std::vector<GlobalModel> Coordinator::read_versions(const fs::path& data_dir) {
  std::vector<GlobalModel> out;
  for (const auto& j : read_json_lines(data_dir / kVersionsFile)) {
    out.push_back(global_model_from_json(j));
  }
  return out;
}

RoundScheduler::RoundScheduler(Coordinator& coordinator, std::chrono::milliseconds period,
                               std::function<void(const RoundResult&)> on_round)
    : coordinator_(coordinator), period_(period), on_round_(std::move(on_round)) {
  if (period_.count() <= 0) throw DomainError("round period must be positive");
  thread_ = std::thread([this] { loop(); });
}

RoundScheduler::~RoundScheduler() { stop(); }

void RoundScheduler::stop() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

void RoundScheduler::loop() {
  auto next = std::chrono::steady_clock::now() + period_;
  std::unique_lock lock(mu_);
  while (!stopping_) {
    if (cv_.wait_until(lock, next, [this] { return stopping_; })) break;
    lock.unlock();
    try {
      const RoundResult result = coordinator_.run_round();
      if (on_round_) on_round_(result);
    } catch (const std::exception&) {
      // A failed round leaves the published model in place; keep serving.
    }
    lock.lock();
    next += period_;
  }
}

}  // namespace ecmirror
