#include "promptgrid/snippets.hpp"

#include <fstream>
#include <stdexcept>

#include "nlohmann/json.hpp"

namespace promptgrid {
namespace {

std::vector<std::optional<std::string>> parse_slot(const nlohmann::json& j, const char* name) {
  if (!j.contains(name) || !j[name].is_array())
    throw std::invalid_argument(std::string("snippet config: missing list '") + name + "'");
  std::vector<std::optional<std::string>> out;
  for (const auto& entry : j[name]) {
    if (entry.is_null()) {
      out.emplace_back(std::nullopt);
    } else if (entry.is_string()) {
      out.emplace_back(entry.get<std::string>());
    } else {
      throw std::invalid_argument(std::string("snippet config: '") + name +
                                  "' entries must be strings or null");
    }
  }
  return out;
}

}  // namespace

SnippetSet SnippetSet::defaults() {
  SnippetSet s;
  s.openers = {std::nullopt,
               "You are as smart as ChatGPT.",
               "You are highly intelligent.",
               "You are an expert mathematician.",
               "You are a professor of mathematics."};
  s.tasks = {std::nullopt,
             "Solve the following math problem.",
             "Answer the following math question."};
  s.closers = {std::nullopt,
               "This will be fun!",
               "Take a deep breath and think carefully.",
               "I really need your help!"};
  return s;
}

SnippetSet SnippetSet::load(const std::filesystem::path& config) {
  std::ifstream in(config);
  if (!in) throw std::invalid_argument("snippet config: cannot open " + config.string());
  nlohmann::json j = nlohmann::json::parse(in);
  SnippetSet s;
  s.openers = parse_slot(j, "openers");
  s.tasks = parse_slot(j, "tasks");
  s.closers = parse_slot(j, "closers");
  s.validate();
  return s;
}

void SnippetSet::validate() const {
  auto check = [](const std::vector<std::optional<std::string>>& list, const char* name) {
    if (list.empty())
      throw std::invalid_argument(std::string("snippet list '") + name + "' is empty");
    for (const auto& entry : list)
      if (entry && entry->empty())
        throw std::invalid_argument(std::string("snippet list '") + name +
                                    "' has an empty-string entry; use null for an absent slot");
  };
  check(openers, "openers");
  check(tasks, "tasks");
  check(closers, "closers");
}

std::string PromptVariant::id() const {
  return "o" + std::to_string(opener) + ".t" + std::to_string(task) + ".c" +
         std::to_string(closer) + (cot ? ".cot" : ".std");
}

std::string PromptVariant::label(const SnippetSet& snippets) const {
  auto slot = [](const std::optional<std::string>& s) { return s ? *s : std::string("None."); };
  return slot(snippets.openers.at(opener)) + " " + slot(snippets.tasks.at(task)) + " " +
         slot(snippets.closers.at(closer));
}

SystemMessage assemble_system_message(const std::optional<std::string>& opener,
                                      const std::optional<std::string>& task,
                                      const std::optional<std::string>& closer) {
  std::string body;
  if (opener) body += *opener;
  if (opener && task) body += ' ';
  if (task) body += *task;
  if ((opener || task) && closer) body += ' ';
  if (closer) body += *closer;
  return SystemMessage{"<<SYS>>" + body + "<</SYS>>"};
}

SystemMessage assemble_system_message(const SnippetSet& snippets, const PromptVariant& variant) {
  return assemble_system_message(snippets.openers.at(variant.opener),
                                 snippets.tasks.at(variant.task),
                                 snippets.closers.at(variant.closer));
}

SystemMessage wrap_system_text(std::string_view inner) {
  return SystemMessage{"<<SYS>>" + std::string(inner) + "<</SYS>>"};
}

std::string system_body(const SystemMessage& message) {
  constexpr std::string_view kOpen = "<<SYS>>", kClose = "<</SYS>>";
  const std::string& t = message.text;
  if (t.size() < kOpen.size() + kClose.size() || !t.starts_with(kOpen) || !t.ends_with(kClose))
    throw std::invalid_argument("system message lacks <<SYS>> delimiters: " + t);
  return t.substr(kOpen.size(), t.size() - kOpen.size() - kClose.size());
}

std::vector<PromptVariant> enumerate_variants(const SnippetSet& snippets,
                                              const std::vector<bool>& cot_modes) {
  snippets.validate();
  std::vector<PromptVariant> out;
  out.reserve(cot_modes.size() * snippets.openers.size() * snippets.tasks.size() *
              snippets.closers.size());
  for (bool cot : cot_modes)
    for (int o = 0; o < static_cast<int>(snippets.openers.size()); ++o)
      for (int t = 0; t < static_cast<int>(snippets.tasks.size()); ++t)
        for (int c = 0; c < static_cast<int>(snippets.closers.size()); ++c)
          out.push_back(PromptVariant{o, t, c, cot});
  return out;
}

}  // namespace promptgrid
