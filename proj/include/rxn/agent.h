// Agent roles, prompt templates and the clients that talk to a
// vision-language backend: a live HTTP client and a fixture-replay mock.

#ifndef RXN_AGENT_H_
#define RXN_AGENT_H_

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rxn {

enum class AgentRole { kPlanner, kMoleculeExpert, kArrowExpert, kTextExpert, kReactionExpert };
inline constexpr AgentRole kAllAgentRoles[] = {
    AgentRole::kPlanner, AgentRole::kMoleculeExpert, AgentRole::kArrowExpert,
    AgentRole::kTextExpert, AgentRole::kReactionExpert};

std::string_view to_string(AgentRole role);
std::optional<AgentRole> parse_agent_role(std::string_view s);

using PromptVars = std::map<std::string, std::string, std::less<>>;

// One template per role with {{name}} placeholders.
class PromptLibrary {
 public:
  // Reads <dir>/<role>.txt for every role that has a file.
  static PromptLibrary load_dir(const std::filesystem::path& dir);

  void set(AgentRole role, std::string text);
  bool has(AgentRole role) const { return templates_.count(role) != 0; }
  const std::string& text(AgentRole role) const;
  std::vector<std::string> variables(AgentRole role) const;

  // Throws PreconditionError when the role has no template or a placeholder
  // has no binding.
  std::string render(AgentRole role, const PromptVars& vars) const;

 private:
  std::map<AgentRole, std::string> templates_;
};

struct AgentLogEntry {
  std::string timestamp;  // UTC, ISO 8601
  AgentRole role = AgentRole::kPlanner;
  std::string prompt_hash;
  double latency_ms = 0.0;
  std::string backend;
  std::string outcome;  // "ok" or the error class
};

class AgentClient {
 public:
  explicit AgentClient(std::shared_ptr<const PromptLibrary> prompts);
  virtual ~AgentClient() = default;
  AgentClient(const AgentClient&) = delete;
  AgentClient& operator=(const AgentClient&) = delete;

  // Renders the role's prompt (failing before any backend traffic when it
  // cannot be rendered), sends it and logs the exchange. Thread-safe.
  std::string request(AgentRole role, const PromptVars& vars, std::string_view image = {});

  std::vector<AgentLogEntry> log() const;
  // Also append each entry as one JSON line to this file.
  void set_log_file(const std::filesystem::path& path);

  const PromptLibrary& prompts() const { return *prompts_; }
  virtual std::string backend_name() const = 0;

 protected:
  virtual std::string send(AgentRole role, const std::string& prompt,
                           std::string_view image) = 0;

 private:
  void record(AgentLogEntry entry);

  std::shared_ptr<const PromptLibrary> prompts_;
  mutable std::mutex log_mutex_;
  std::vector<AgentLogEntry> log_;
  std::ofstream log_file_;
};

// Replays responses stored at <dir>/<role>/<key>.txt, where key is
// fixture_key(role, prompt, image). Missing fixtures throw FixtureMissing.
class MockAgentClient : public AgentClient {
 public:
  MockAgentClient(std::shared_ptr<const PromptLibrary> prompts, std::filesystem::path dir);

  static std::string fixture_key(AgentRole role, std::string_view prompt,
                                 std::string_view image);
  std::filesystem::path fixture_path(AgentRole role, std::string_view prompt,
                                     std::string_view image) const;
  std::string backend_name() const override { return "mock"; }

 protected:
  std::string send(AgentRole role, const std::string& prompt, std::string_view image) override;

 private:
  std::filesystem::path dir_;
};

struct LiveBackendConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8080/v1/chat/completions
  std::string model;
  std::string api_key_env = "RXN_API_KEY";  // key is read from this variable only
  int max_retries = 3;
  std::chrono::milliseconds backoff{500};
  std::chrono::seconds timeout{60};
  int max_in_flight = 4;
  std::chrono::milliseconds min_interval{0};  // between request starts
};

// POSTs {"model", "messages": [{"role": "user", "content"}], "image"} and
// returns choices[0].message.content (or the raw body when the response has
// no such field). Gives up with BackendUnavailable after max_retries.
class LiveAgentClient : public AgentClient {
 public:
  LiveAgentClient(std::shared_ptr<const PromptLibrary> prompts, LiveBackendConfig config);

  std::string backend_name() const override { return "live:" + config_.model; }

 protected:
  std::string send(AgentRole role, const std::string& prompt, std::string_view image) override;

 private:
  void acquire_slot();
  void release_slot();

  LiveBackendConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  std::mutex slot_mutex_;
  std::condition_variable slot_cv_;
  int in_flight_ = 0;
  std::chrono::steady_clock::time_point last_start_{};
};

}  // namespace rxn

#endif  // RXN_AGENT_H_
