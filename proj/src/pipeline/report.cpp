#include "topoterm/pipeline/report.hpp"

#include <cstdio>
#include <map>
#include <sstream>

#include "topoterm/error.hpp"
#include "topoterm/evaluation.hpp"

namespace topoterm {

namespace {

nlohmann::json term_set_block(const TermSet& predicted, const EvaluationInputs& in) {
  const MetricsReport m = evaluate(predicted, in.gold);
  const TermSet tp = true_positives(predicted, in.gold);
  return {{"metrics", to_json(m)},
          {"tags", predicted.size()},
          {"per_domain", to_json(per_domain_recall(predicted, in.gold))},
          {"seen_unseen", to_json(seen_unseen_split(tp, in.training_gold))}};
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

nlohmann::json build_report(const EvaluationInputs& in) {
  nlohmann::json report;
  report["gold_terms"] = in.gold.size();
  report["eval_utterances"] = in.eval_utterances.size();

  std::map<std::string, TermSet> per_model;
  std::vector<TermSet> all_sets, tda_sets;
  std::vector<std::string> all_ids, tda_ids;
  nlohmann::json models = nlohmann::json::object();
  for (const auto& mp : in.models) {
    if (per_model.contains(mp.model_id)) throw ValidationError("duplicate model id '" + mp.model_id + "'");
    TermSet predicted = predicted_terms(mp.predictions, in.eval_utterances);
    nlohmann::json block = term_set_block(predicted, in);
    block["kind"] = to_string(mp.kind);
    block["tag_occurrences"] = span_count(mp.predictions);
    block["metrics"]["predicted_occurrences"] = span_count(mp.predictions);
    block["uncertainty_l2"] = mean_uncertainty_l2(mp.predictions, in.eval_utterances);
    models[mp.model_id] = std::move(block);
    all_sets.push_back(predicted);
    all_ids.push_back(mp.model_id);
    if (is_tda_kind(mp.kind)) {
      tda_sets.push_back(predicted);
      tda_ids.push_back(mp.model_id);
    }
    per_model.emplace(mp.model_id, std::move(predicted));
  }
  report["models"] = std::move(models);

  nlohmann::json unions = nlohmann::json::object();
  bool monotone = true;
  auto add_union = [&](const std::string& name, const std::vector<TermSet>& sets,
                       const std::vector<std::string>& ids) {
    if (sets.empty()) return;
    const TermSet u = union_predictions(sets);
    nlohmann::json block = term_set_block(u, in);
    block["members"] = ids;
    const double r = block["metrics"]["recall"].get<double>();
    for (const auto& id : ids) {
      if (r < report["models"][id]["metrics"]["recall"].get<double>()) monotone = false;
    }
    unions[name] = std::move(block);
  };
  add_union("tda", tda_sets, tda_ids);
  add_union("all", all_sets, all_ids);
  report["unions"] = std::move(unions);
  report["union_recall_monotone"] = monotone;

  if (per_model.size() >= 2 && per_model.size() <= kMaxOverlapModels) {
    report["overlap"] = to_json(overlap_report(per_model, in.gold));
  } else {
    report["overlap"] = nullptr;
  }
  return report;
}

std::string render_report_text(const nlohmann::json& report) {
  std::ostringstream out;
  out << "gold terms: " << report.at("gold_terms").get<std::size_t>() << "  (evaluation utterances: "
      << report.at("eval_utterances").get<std::size_t>() << ")\n\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %9s %9s %9s %7s %7s %9s %7s %7s\n", "model", "precision", "recall",
                "f1", "tags", "spans", "L2", "seen", "unseen");
  out << line;
  auto row = [&](const std::string& name, const nlohmann::json& b) {
    const auto& m = b.at("metrics");
    const auto& su = b.at("seen_unseen");
    const std::string l2 = b.contains("uncertainty_l2") ? fixed(b["uncertainty_l2"].get<double>()) : "-";
    const std::string spans = b.contains("tag_occurrences") ? std::to_string(b["tag_occurrences"].get<std::size_t>()) : "-";
    const std::string seen = su.at("seen").is_null() ? "-" : fixed(su["seen"].get<double>(), 3);
    const std::string unseen = su.at("unseen").is_null() ? "-" : fixed(su["unseen"].get<double>(), 3);
    std::snprintf(line, sizeof line, "%-16s %9s %9s %9s %7zu %7s %9s %7s %7s\n", name.c_str(),
                  fixed(m.at("precision").get<double>()).c_str(), fixed(m.at("recall").get<double>()).c_str(),
                  fixed(m.at("f1").get<double>()).c_str(), b.at("tags").get<std::size_t>(), spans.c_str(),
                  l2.c_str(), seen.c_str(), unseen.c_str());
    out << line;
  };
  for (const auto& [id, b] : report.at("models").items()) row(id, b);
  for (const auto& [id, b] : report.at("unions").items()) row("union:" + id, b);
  out << "\nunion recall >= every member: " << (report.at("union_recall_monotone").get<bool>() ? "yes" : "no")
      << "\n";

  out << "\nrecall by domain\n";
  for (const auto& [id, b] : report.at("models").items()) {
    out << "  " << id << ":";
    for (const auto& [dom, d] : b.at("per_domain").items()) {
      out << " " << dom << "=" << fixed(d.at("recall").get<double>(), 3);
    }
    out << "\n";
  }
  if (!report.at("overlap").is_null()) {
    out << "\ntrue-positive overlap (exclusive counts)\n";
    for (const auto& r : report["overlap"].at("regions")) {
      std::string members;
      for (const auto& m : r.at("members")) members += (members.empty() ? "" : "&") + m.get<std::string>();
      out << "  " << members << ": " << r.at("exclusive").get<std::size_t>() << "\n";
    }
    out << "  union: " << report["overlap"].at("union").get<std::size_t>() << "\n";
  }
  return out.str();
}

std::string per_domain_csv(const nlohmann::json& report) {
  std::ostringstream out;
  out << "model,domain,recall,found,gold_count\n";
  auto emit = [&](const std::string& name, const nlohmann::json& b) {
    for (const auto& [dom, d] : b.at("per_domain").items()) {
      out << csv_field(name) << ',' << csv_field(dom) << ',' << d.at("recall").dump() << ','
          << d.at("found").get<std::size_t>() << ',' << d.at("gold_count").get<std::size_t>() << '\n';
    }
  };
  for (const auto& [id, b] : report.at("models").items()) emit(id, b);
  for (const auto& [id, b] : report.at("unions").items()) emit("union:" + id, b);
  return out.str();
}

std::string overlap_csv(const nlohmann::json& report) {
  std::ostringstream out;
  out << "members,exclusive,intersection\n";
  if (report.at("overlap").is_null()) return out.str();
  for (const auto& r : report["overlap"].at("regions")) {
    std::string members;
    for (const auto& m : r.at("members")) members += (members.empty() ? "" : "+") + m.get<std::string>();
    out << csv_field(members) << ',' << r.at("exclusive").get<std::size_t>() << ','
        << r.at("intersection").get<std::size_t>() << '\n';
  }
  return out.str();
}

}  // namespace topoterm
