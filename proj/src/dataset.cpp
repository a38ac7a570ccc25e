#include "promptgrid/dataset.hpp"

#include <fstream>

#include "nlohmann/json.hpp"

namespace promptgrid {

std::vector<QAItem> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("dataset: cannot open " + path.string());

  std::vector<QAItem> items;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string where = path.string() + ":" + std::to_string(line_no);

    nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object())
      throw DatasetError("dataset: malformed record at " + where);
    if (!record.contains("question") || !record["question"].is_string() ||
        !record.contains("answer") || !record["answer"].is_string())
      throw DatasetError("dataset: record missing question/answer fields at " + where);

    QAItem item;
    item.index = static_cast<int>(items.size());
    item.question = record["question"].get<std::string>();
    item.gold_raw = record["answer"].get<std::string>();
    if (item.question.empty()) throw DatasetError("dataset: empty question at " + where);

    std::size_t marker = item.gold_raw.rfind("####");
    if (marker == std::string::npos)
      throw DatasetError("dataset: no #### marker in answer at " + where);
    std::optional<CanonicalNumber> gold = normalize(
        std::string_view(item.gold_raw).substr(marker + 4));
    if (!gold) throw DatasetError("dataset: non-numeric gold after #### at " + where);
    item.gold = *gold;
    items.push_back(std::move(item));
  }
  return items;
}

SplitPlan make_splits(std::span<const QAItem> items, int eval_n, int opt_n) {
  if (eval_n < 0 || opt_n < 0) throw DatasetError("make_splits: negative split size");
  const int n = static_cast<int>(items.size());
  if (n < eval_n + opt_n + 4)
    throw DatasetError("make_splits: dataset has " + std::to_string(n) + " items, need >= " +
                       std::to_string(eval_n + opt_n + 4));

  SplitPlan plan;
  plan.eval.assign(items.begin(), items.begin() + eval_n);
  plan.icl.assign(items.end() - 4, items.end());
  plan.opt.assign(items.end() - 4 - opt_n, items.end() - 4);
  return plan;
}

}  // namespace promptgrid
