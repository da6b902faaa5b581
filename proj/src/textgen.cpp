#include "lovm/textgen.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "lovm/error.hpp"
#include "lovm/parallel.hpp"

namespace lovm {

using nlohmann::ordered_json;

TextKind parse_text_kind(const std::string& text) {
  if (text == "captions") return TextKind::Captions;
  if (text == "synonyms") return TextKind::Synonyms;
  fail(ErrorKind::InvalidArgument, "text kind must be captions or synonyms, got '" + text + "'");
}

std::string to_string(TextKind kind) { return kind == TextKind::Captions ? "captions" : "synonyms"; }

double temperature_for(TextKind kind) noexcept { return kind == TextKind::Captions ? 1.0 : 0.1; }

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view strip_marker(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')')) return trim(s.substr(i + 1));
  if (!s.empty() && (s.front() == '-' || s.front() == '*')) return trim(s.substr(1));
  return s;
}

}  // namespace

void validate(const TextDataset& ds) {
  if (ds.class_names.size() != ds.texts.size()) {
    fail(ErrorKind::Format, "text dataset: class list and text lists differ in length");
  }
  for (std::size_t c = 0; c < ds.class_names.size(); ++c) {
    if (ds.texts[c].empty()) {
      fail(ErrorKind::EmptyParse, "text dataset: class '" + ds.class_names[c] + "' has no texts");
    }
    for (const auto& t : ds.texts[c]) {
      if (trim(t).empty()) {
        fail(ErrorKind::Format, "text dataset: blank entry for class '" + ds.class_names[c] + "'");
      }
    }
  }
}

void write_text_dataset(const TextDataset& ds, const std::filesystem::path& path) {
  validate(ds);
  ordered_json classes = ordered_json::object();
  ordered_json counts = ordered_json::object();
  for (std::size_t c = 0; c < ds.class_names.size(); ++c) {
    classes[ds.class_names[c]] = ds.texts[c];
    counts[ds.class_names[c]] = ds.texts[c].size();
  }
  const ordered_json doc = {{"kind", to_string(ds.kind)}, {"classes", classes}, {"counts", counts}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

TextDataset load_text_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  TextDataset ds;
  try {
    const ordered_json doc = ordered_json::parse(in);
    ds.kind = parse_text_kind(doc.at("kind").get<std::string>());
    for (const auto& [name, items] : doc.at("classes").items()) {
      ds.class_names.push_back(name);
      ds.texts.push_back(items.get<std::vector<std::string>>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
  validate(ds);
  return ds;
}

std::string build_caption_prompt(const TaskSpec& spec, const std::string& class_name) {
  (void)spec.class_index(class_name);
  return "Generate long and confusing image captions for the " + spec.domain +
         " domain, which will be used to evaluate a Vision-Language Model's " + spec.task +
         " performance.\n\nGenerate 50 captions for " + class_name + ":";
}

std::string build_synonym_prompt(const std::string& class_name) {
  if (trim(class_name).empty()) fail(ErrorKind::InvalidArgument, "synonym prompt: empty class name");
  return "Please list the superclasses/synonyms for " + class_name +
         ". For example:\n\nchair: [furniture, seat, bench, armchair, sofa]\n\n" + class_name + ":";
}

std::vector<std::string> parse_list_response(std::string_view text) {
  std::vector<std::string> items;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('\n', start), text.size());
    const auto item = strip_marker(trim(text.substr(start, end - start)));
    if (!item.empty()) items.emplace_back(item);
    start = end + 1;
  }
  return items;
}

std::vector<std::string> parse_synonym_response(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& line : parse_list_response(text)) {
    const auto open = line.find('[');
    const auto close = line.rfind(']');
    if (open == std::string::npos || close == std::string::npos || close < open) {
      out.push_back(line);
      continue;
    }
    std::string_view inner(line);
    inner = inner.substr(open + 1, close - open - 1);
    std::size_t start = 0;
    while (start <= inner.size()) {
      const std::size_t comma = std::min(inner.find(',', start), inner.size());
      const auto item = trim(inner.substr(start, comma - start));
      if (!item.empty()) out.emplace_back(item);
      start = comma + 1;
    }
  }
  return out;
}

std::string render_numbered(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    out += std::to_string(i + 1) + ". " + items[i] + "\n";
  }
  return out;
}

LlmClientConfig LlmClientConfig::from_env(std::string endpoint) {
  LlmClientConfig cfg;
  cfg.endpoint = std::move(endpoint);
  if (const char* key = std::getenv("LOVM_LLM_API_KEY")) cfg.api_key = key;
  return cfg;
}

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

SplitUrl split_endpoint(const std::string& endpoint) {
  const auto scheme = endpoint.find("://");
  if (scheme == std::string::npos) {
    fail(ErrorKind::InvalidArgument, "endpoint must include a scheme: '" + endpoint + "'");
  }
  const auto path = endpoint.find('/', scheme + 3);
  SplitUrl out;
  out.origin = endpoint.substr(0, path);
  out.prefix = path == std::string::npos ? "" : endpoint.substr(path);
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

}  // namespace

std::string chat_completion(const LlmClientConfig& cfg, const std::string& prompt, double temperature) {
  const SplitUrl url = split_endpoint(cfg.endpoint);
  const ordered_json request = {
      {"model", cfg.model},
      {"messages", ordered_json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", temperature}};
  const std::string body = request.dump();
  httplib::Headers headers;
  if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);

  std::string last_error = "no attempt made";
  auto backoff = cfg.initial_backoff;
  const std::size_t attempts = std::max<std::size_t>(cfg.max_attempts, 1);
  for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(url.origin);
    client.set_connection_timeout(cfg.timeout);
    client.set_read_timeout(cfg.timeout);
    const auto res = client.Post(url.prefix + "/chat/completions", headers, body, "application/json");
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (trim(res->body).empty()) return {};
    try {
      const auto reply = nlohmann::json::parse(res->body);
      const auto& content = reply.at("choices").at(0).at("message").at("content");
      return content.is_null() ? std::string{} : content.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Format, std::string("malformed chat-completion response: ") + e.what());
    }
  }
  fail(ErrorKind::Transport, "chat completion failed after " + std::to_string(attempts) +
                                 " attempts: " + last_error);
}

TextDataset generate_text_dataset(const TaskSpec& spec, TextKind kind, const LlmClientConfig& cfg) {
  validate(spec);
  TextDataset ds;
  ds.kind = kind;
  ds.class_names = spec.class_names;
  ds.texts.resize(spec.num_classes());
  const double temperature = temperature_for(kind);
  parallel_for(spec.num_classes(), std::max<std::size_t>(cfg.parallelism, 1), [&](std::size_t c) {
    const std::string& name = spec.class_names[c];
    const std::string prompt = kind == TextKind::Captions ? build_caption_prompt(spec, name)
                                                          : build_synonym_prompt(name);
    const std::string reply = chat_completion(cfg, prompt, temperature);
    auto items = kind == TextKind::Captions ? parse_list_response(reply) : parse_synonym_response(reply);
    if (items.empty()) {
      fail(ErrorKind::EmptyParse, "LLM reply for class '" + name + "' contained no items");
    }
    ds.texts[c] = std::move(items);
  });
  return ds;
}

}  // namespace lovm
