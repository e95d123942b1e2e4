#include <httplib.h>

#include "rxn/agent.h"

#include <cstdlib>
#include <ctime>
#include <regex>
#include <sstream>
#include <thread>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>

#include "rxn/errors.h"
#include "rxn/hash.h"

namespace rxn {
namespace {

const std::regex& placeholder_re() {
  static const std::regex re(R"(\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\})");
  return re;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()) % 1000;
  return fmt::format("{:%Y-%m-%dT%H:%M:%S}.{:03d}Z", fmt::gmtime(std::chrono::system_clock::to_time_t(now)),
                     static_cast<int>(ms.count()));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view to_string(AgentRole role) {
  switch (role) {
    case AgentRole::kPlanner:
      return "planner";
    case AgentRole::kMoleculeExpert:
      return "molecule_expert";
    case AgentRole::kArrowExpert:
      return "arrow_expert";
    case AgentRole::kTextExpert:
      return "text_expert";
    case AgentRole::kReactionExpert:
      return "reaction_expert";
  }
  return "planner";
}

std::optional<AgentRole> parse_agent_role(std::string_view s) {
  for (AgentRole r : kAllAgentRoles) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

PromptLibrary PromptLibrary::load_dir(const std::filesystem::path& dir) {
  PromptLibrary lib;
  for (AgentRole r : kAllAgentRoles) {
    const auto path = dir / (std::string(to_string(r)) + ".txt");
    if (std::filesystem::is_regular_file(path)) lib.set(r, read_file(path));
  }
  return lib;
}

void PromptLibrary::set(AgentRole role, std::string text) {
  templates_[role] = std::move(text);
}

const std::string& PromptLibrary::text(AgentRole role) const {
  auto it = templates_.find(role);
  if (it == templates_.end()) {
    throw PreconditionError("no prompt template for role " + std::string(to_string(role)));
  }
  return it->second;
}

std::vector<std::string> PromptLibrary::variables(AgentRole role) const {
  std::vector<std::string> out;
  const std::string& t = text(role);
  for (std::sregex_iterator it(t.begin(), t.end(), placeholder_re()), end; it != end; ++it) {
    std::string name = (*it)[1];
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  }
  return out;
}

std::string PromptLibrary::render(AgentRole role, const PromptVars& vars) const {
  const std::string& t = text(role);
  std::string out;
  std::size_t last = 0;
  for (std::sregex_iterator it(t.begin(), t.end(), placeholder_re()), end; it != end; ++it) {
    const std::string name = (*it)[1];
    auto v = vars.find(name);
    if (v == vars.end()) {
      throw PreconditionError("prompt variable \"" + name + "\" is unbound for role " +
                              std::string(to_string(role)));
    }
    out.append(t, last, static_cast<std::size_t>(it->position()) - last);
    out += v->second;
    last = static_cast<std::size_t>(it->position() + it->length());
  }
  out.append(t, last, std::string::npos);
  return out;
}

AgentClient::AgentClient(std::shared_ptr<const PromptLibrary> prompts)
    : prompts_(std::move(prompts)) {
  if (!prompts_) throw PreconditionError("agent client needs a prompt library");
}

std::string AgentClient::request(AgentRole role, const PromptVars& vars,
                                 std::string_view image) {
  const std::string prompt = prompts_->render(role, vars);
  AgentLogEntry entry;
  entry.timestamp = utc_timestamp();
  entry.role = role;
  entry.prompt_hash = sha256_hex(prompt);
  entry.backend = backend_name();
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  };
  try {
    std::string response = send(role, prompt, image);
    entry.latency_ms = elapsed();
    entry.outcome = "ok";
    record(std::move(entry));
    return response;
  } catch (const Error& e) {
    entry.latency_ms = elapsed();
    entry.outcome = e.kind();
    record(std::move(entry));
    throw;
  }
}

void AgentClient::record(AgentLogEntry entry) {
  std::lock_guard lock(log_mutex_);
  if (log_file_.is_open()) {
    nlohmann::ordered_json j;
    j["timestamp"] = entry.timestamp;
    j["role"] = to_string(entry.role);
    j["prompt_hash"] = entry.prompt_hash;
    j["latency_ms"] = entry.latency_ms;
    j["backend"] = entry.backend;
    j["outcome"] = entry.outcome;
    log_file_ << j.dump() << '\n';
    log_file_.flush();
  }
  log_.push_back(std::move(entry));
}

std::vector<AgentLogEntry> AgentClient::log() const {
  std::lock_guard lock(log_mutex_);
  return log_;
}

void AgentClient::set_log_file(const std::filesystem::path& path) {
  std::lock_guard lock(log_mutex_);
  log_file_.close();
  log_file_.open(path, std::ios::app);
  if (!log_file_) throw ConfigError("cannot open agent log " + path.string());
}

MockAgentClient::MockAgentClient(std::shared_ptr<const PromptLibrary> prompts,
                                 std::filesystem::path dir)
    : AgentClient(std::move(prompts)), dir_(std::move(dir)) {}

std::string MockAgentClient::fixture_key(AgentRole role, std::string_view prompt,
                                         std::string_view image) {
  std::string material(to_string(role));
  material += '\n';
  material += prompt;
  material += '\n';
  material += sha256_hex(image);
  return sha256_hex(material);
}

std::filesystem::path MockAgentClient::fixture_path(AgentRole role, std::string_view prompt,
                                                    std::string_view image) const {
  return dir_ / std::string(to_string(role)) / (fixture_key(role, prompt, image) + ".txt");
}

std::string MockAgentClient::send(AgentRole role, const std::string& prompt,
                                  std::string_view image) {
  const auto path = fixture_path(role, prompt, image);
  if (!std::filesystem::is_regular_file(path)) {
    throw FixtureMissing("no fixture for " + std::string(to_string(role)) + " request at " +
                         path.string());
  }
  return read_file(path);
}

LiveAgentClient::LiveAgentClient(std::shared_ptr<const PromptLibrary> prompts,
                                 LiveBackendConfig config)
    : AgentClient(std::move(prompts)), config_(std::move(config)) {
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.endpoint, m, url)) {
    throw ConfigError("endpoint must be an http(s) URL: \"" + config_.endpoint + "\"");
  }
  scheme_host_port_ = m[1];
  path_ = m[2].matched ? std::string(m[2]) : "/";
  if (config_.max_in_flight < 1) throw ConfigError("max_in_flight must be at least 1");
  if (config_.max_retries < 0) throw ConfigError("max_retries must be non-negative");
}

void LiveAgentClient::acquire_slot() {
  std::unique_lock lock(slot_mutex_);
  slot_cv_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
  ++in_flight_;
  if (config_.min_interval.count() > 0) {
    const auto earliest = last_start_ + config_.min_interval;
    const auto now = std::chrono::steady_clock::now();
    if (now < earliest) {
      last_start_ = earliest;
      lock.unlock();
      std::this_thread::sleep_until(earliest);
      return;
    }
    last_start_ = now;
  }
}

void LiveAgentClient::release_slot() {
  {
    std::lock_guard lock(slot_mutex_);
    --in_flight_;
  }
  slot_cv_.notify_one();
}

std::string LiveAgentClient::send(AgentRole role, const std::string& prompt,
                                  std::string_view image) {
  nlohmann::ordered_json body;
  body["model"] = config_.model;
  body["messages"] = nlohmann::ordered_json::array(
      {{{"role", "user"}, {"content", prompt}}});
  if (!image.empty()) body["image"] = httplib::detail::base64_encode(std::string(image));
  body["metadata"] = {{"agent_role", to_string(role)}};
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config_.backoff * (1 << (attempt - 1)));
    acquire_slot();
    httplib::Result res;
    {
      httplib::Client cli(scheme_host_port_);
      cli.set_connection_timeout(config_.timeout);
      cli.set_read_timeout(config_.timeout);
      cli.set_write_timeout(config_.timeout);
      res = cli.Post(path_, headers, payload, "application/json");
    }
    release_slot();
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw BackendUnavailable("backend returned HTTP " + std::to_string(res->status));
    }
    auto parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) {
      const auto ptr = nlohmann::json::json_pointer("/choices/0/message/content");
      if (parsed.contains(ptr) && parsed[ptr].is_string()) return parsed[ptr].get<std::string>();
    }
    return res->body;
  }
  throw BackendUnavailable("backend unavailable after " + std::to_string(config_.max_retries + 1) +
                           " attempts: " + last_error);
}

}  // namespace rxn
