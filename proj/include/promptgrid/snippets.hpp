#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace promptgrid {

/// The three snippet slots whose cross product forms the system-message
/// grid. An absent entry (slot contributes nothing) is distinct from empty
/// text; absent entries are modeled as nullopt, never as a sentinel string.
struct SnippetSet {
  std::vector<std::optional<std::string>> openers;
  std::vector<std::optional<std::string>> tasks;
  std::vector<std::optional<std::string>> closers;

  /// The stock 5x3x4 grid, entry 0 of each list absent.
  static SnippetSet defaults();

  /// Loads lists from a JSON config: {"openers": [null, "..."], ...}.
  /// `null` denotes an absent entry.
  static SnippetSet load(const std::filesystem::path& config);

  /// Throws std::invalid_argument on empty lists or empty-string entries.
  void validate() const;
};

/// One cell of the grid: indices into the snippet lists plus the CoT flag.
struct PromptVariant {
  int opener = 0;
  int task = 0;
  int closer = 0;
  bool cot = false;

  /// Stable identifier, e.g. "o2.t0.c3.cot".
  std::string id() const;

  /// Ranked-list rendering: slot text or "None." joined by single spaces,
  /// e.g. "None. Solve the following math problem. None."
  std::string label(const SnippetSet& snippets) const;

  friend bool operator==(const PromptVariant&, const PromptVariant&) = default;
};

struct SystemMessage {
  std::string text;  // includes the <<SYS>>...<</SYS>> delimiters
};

/// Joins the three slots inside <<SYS>>...<</SYS>> markers. A single space
/// follows the opener iff both opener and task are present; a single space
/// follows the task slot iff (opener or task is present) and the closer is
/// present. Absent slots contribute nothing, so the all-absent baseline is
/// exactly "<<SYS>><</SYS>>" and no literal "None" is ever introduced.
SystemMessage assemble_system_message(const std::optional<std::string>& opener,
                                      const std::optional<std::string>& task,
                                      const std::optional<std::string>& closer);

SystemMessage assemble_system_message(const SnippetSet& snippets, const PromptVariant& variant);

/// Wraps free-form text (an optimizer candidate) in the system delimiters.
SystemMessage wrap_system_text(std::string_view inner);

/// Inverse of wrap_system_text: the text between the delimiters.
std::string system_body(const SystemMessage& message);

/// Full grid for each CoT mode in the order given, each mode's variants in
/// lexicographic (opener, task, closer) order. The all-absent baseline of
/// the default set is therefore element 0 of each mode's block.
std::vector<PromptVariant> enumerate_variants(const SnippetSet& snippets,
                                              const std::vector<bool>& cot_modes);

}  // namespace promptgrid
