#include "reflect/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include "reflect/jsonl.hpp"
#include "reflect/util.hpp"

namespace reflect {

std::vector<OutcomePair> pair_outcomes(const std::vector<Attempt>& baseline,
                                       const std::vector<Attempt>& reanswers) {
  std::map<std::string, Verdict> by_identity;
  for (const auto& attempt : reanswers) {
    by_identity[attempt.identity()] = attempt.verdict;
  }
  std::vector<OutcomePair> outcomes;
  outcomes.reserve(baseline.size());
  for (const auto& attempt : baseline) {
    OutcomePair pair;
    pair.source = attempt.source;
    pair.source_id = attempt.source_id;
    pair.baseline = attempt.verdict;
    if (attempt.verdict == Verdict::correct) {
      pair.reanswer = Verdict::correct;  // carry-forward, never re-asked
    } else {
      auto it = by_identity.find(attempt.identity());
      if (it == by_identity.end()) {
        throw std::runtime_error("missing re-answer attempt for " + attempt.identity());
      }
      pair.reanswer = it->second;
    }
    outcomes.push_back(pair);
  }
  return outcomes;
}

ScoreSummary score(const std::vector<OutcomePair>& outcomes) {
  if (outcomes.empty()) throw std::invalid_argument("cannot score an empty outcome list");
  ScoreSummary summary;
  summary.total_base = static_cast<long>(outcomes.size());
  for (const auto& pair : outcomes) {
    if (pair.baseline == Verdict::correct) {
      ++summary.correct_base;
    } else if (pair.reanswer == Verdict::correct) {
      ++summary.correct_ref;
    }
  }
  summary.accuracy_base =
      static_cast<double>(summary.correct_base) / static_cast<double>(summary.total_base);
  summary.accuracy_ref =
      static_cast<double>(summary.correct_base + summary.correct_ref) /
      static_cast<double>(summary.total_base);
  return summary;
}

ScoreSummary score_baseline(const std::vector<Attempt>& baseline) {
  if (baseline.empty()) throw std::invalid_argument("cannot score an empty attempt list");
  ScoreSummary summary;
  summary.total_base = static_cast<long>(baseline.size());
  for (const auto& attempt : baseline) {
    if (attempt.verdict == Verdict::correct) ++summary.correct_base;
  }
  summary.accuracy_base =
      static_cast<double>(summary.correct_base) / static_cast<double>(summary.total_base);
  summary.accuracy_ref = summary.accuracy_base;
  return summary;
}

ContingencyTable contingency(const std::vector<OutcomePair>& outcomes) {
  ContingencyTable table;
  for (const auto& pair : outcomes) {
    bool base_correct = pair.baseline == Verdict::correct;
    bool re_correct = pair.reanswer == Verdict::correct;
    if (!base_correct && !re_correct) ++table.a;
    if (!base_correct && re_correct) ++table.b;
    if (base_correct && !re_correct) ++table.c;
    if (base_correct && re_correct) ++table.d;
  }
  return table;
}

McNemarResult mcnemar(const ContingencyTable& table, bool corrected) {
  long discordant = table.b + table.c;
  if (discordant <= 0) {
    throw std::domain_error("McNemar test undefined: no discordant pairs (b + c = 0)");
  }
  double diff = static_cast<double>(table.b - table.c);
  double numerator = corrected ? std::pow(std::abs(diff) - 1.0, 2.0) : diff * diff;
  McNemarResult result;
  result.corrected = corrected;
  result.statistic = numerator / static_cast<double>(discordant);
  result.p_value = chi2_sf(result.statistic);
  return result;
}

double chi2_sf(double x) {
  if (x < 0.0) throw std::invalid_argument("chi2_sf requires x >= 0");
  return std::erfc(std::sqrt(x / 2.0));
}

RunData load_run(const std::string& run_dir) {
  RunPaths paths{run_dir};
  RunData run;
  run.manifest = load_manifest(paths.manifest_path());
  run.baseline = load_attempts(paths.baseline_path());
  long incorrect = 0;
  for (const auto& attempt : run.baseline) {
    if (attempt.verdict != Verdict::correct) ++incorrect;
  }
  for (AgentKind agent : run.manifest.agents) {
    std::string path = paths.reanswer_path(agent);
    auto marker = run.manifest.reanswer_done.find(to_string(agent));
    bool done = marker != run.manifest.reanswer_done.end() && marker->second;
    if (file_exists(path)) {
      run.reanswers[agent] = load_attempts(path);
    } else if (done && incorrect == 0) {
      run.reanswers[agent] = {};  // nothing to re-answer, no file written
    } else if (done) {
      throw std::runtime_error("missing phase artifact: " + path);
    }
  }
  return run;
}

std::vector<AggregateRow> aggregate(const std::vector<RunData>& runs, GroupBy group_by) {
  // Pool outcome pairs per (group, agent), then score each cell.
  std::map<std::pair<std::string, AgentKind>, std::vector<OutcomePair>> cells;

  for (const auto& run : runs) {
    auto group_key = [&](const OutcomePair& pair) -> std::string {
      switch (group_by) {
        case GroupBy::model: return run.manifest.model_id;
        case GroupBy::exam: return pair.source;
        case GroupBy::agent: return "";  // filled with the agent name below
      }
      return "";
    };

    // Baseline column: carry-forward pairs against itself.
    std::vector<OutcomePair> base_pairs;
    base_pairs.reserve(run.baseline.size());
    for (const auto& attempt : run.baseline) {
      base_pairs.push_back({attempt.source, attempt.source_id, attempt.verdict, attempt.verdict});
    }
    for (const auto& pair : base_pairs) {
      std::string key = group_by == GroupBy::agent ? to_string(AgentKind::baseline)
                                                   : group_key(pair);
      cells[{key, AgentKind::baseline}].push_back(pair);
    }

    for (const auto& [agent, attempts] : run.reanswers) {
      std::vector<OutcomePair> pairs = pair_outcomes(run.baseline, attempts);
      for (const auto& pair : pairs) {
        std::string key = group_by == GroupBy::agent ? to_string(agent) : group_key(pair);
        cells[{key, agent}].push_back(pair);
      }
    }
  }

  std::vector<AggregateRow> rows;
  rows.reserve(cells.size());
  for (const auto& [key, outcomes] : cells) {
    AggregateRow row;
    row.group = key.first;
    row.agent = key.second;
    row.summary = score(outcomes);
    rows.push_back(std::move(row));
  }
  return rows;
}

ValidationReport validate_run(const RunData& run, const Exam* exam) {
  ValidationReport report;
  auto violation = [&](const std::string& message) {
    report.ok = false;
    report.violations.push_back(message);
  };

  std::set<std::string> baseline_ids;
  std::set<std::string> incorrect_ids;
  for (const auto& attempt : run.baseline) {
    if (!baseline_ids.insert(attempt.identity()).second) {
      violation("duplicate baseline attempt for " + attempt.identity());
    }
    if (attempt.verdict != Verdict::correct) incorrect_ids.insert(attempt.identity());
  }
  if (exam) {
    if (run.baseline.size() != exam->problems.size()) {
      violation("baseline attempt count " + std::to_string(run.baseline.size()) +
                " != exam size " + std::to_string(exam->problems.size()));
    }
    for (const auto& problem : exam->problems) {
      if (!baseline_ids.count(problem.identity())) {
        violation("missing baseline attempt for " + problem.identity());
      }
    }
  }

  for (const auto& [agent, attempts] : run.reanswers) {
    std::set<std::string> seen;
    for (const auto& attempt : attempts) {
      if (!seen.insert(attempt.identity()).second) {
        violation("duplicate " + to_string(agent) + " re-answer for " + attempt.identity());
      }
      if (!incorrect_ids.count(attempt.identity())) {
        violation(to_string(agent) + " re-answered baseline-correct problem " +
                  attempt.identity());
      }
    }
    if (attempts.size() != incorrect_ids.size()) {
      violation(to_string(agent) + " re-answer count " + std::to_string(attempts.size()) +
                " != incorrect count " + std::to_string(incorrect_ids.size()));
      continue;
    }
    std::vector<OutcomePair> pairs = pair_outcomes(run.baseline, attempts);
    ContingencyTable table = contingency(pairs);
    if (table.c != 0) {
      violation(to_string(agent) + ": contingency cell c = " + std::to_string(table.c));
    }
    ScoreSummary summary = score(pairs);
    if (summary.accuracy_ref < summary.accuracy_base) {
      violation(to_string(agent) + ": accuracy_ref < accuracy_base");
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Reports

std::string format_accuracy(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.3f", value);
  return buffer;
}

namespace {

std::string format_statistic(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.3f", value);
  return buffer;
}

std::string format_p(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.6g", value);
  return buffer;
}

std::vector<AgentKind> agents_in(const std::vector<RunData>& runs) {
  std::vector<AgentKind> agents{AgentKind::baseline};
  for (AgentKind agent : reflecting_agents()) {
    for (const auto& run : runs) {
      if (run.reanswers.count(agent)) {
        agents.push_back(agent);
        break;
      }
    }
  }
  return agents;
}

std::vector<std::string> models_in(const std::vector<RunData>& runs) {
  std::vector<std::string> models;
  for (const auto& run : runs) {
    if (std::find(models.begin(), models.end(), run.manifest.model_id) == models.end()) {
      models.push_back(run.manifest.model_id);
    }
  }
  return models;
}

}  // namespace

void write_reports(const std::vector<RunData>& runs, const std::string& out_dir, bool corrected) {
  if (runs.empty()) throw std::invalid_argument("no runs to report");
  for (const auto& run : runs) {
    if (run.manifest.config_digest != runs.front().manifest.config_digest) {
      throw DigestMismatchError("refusing to mix runs with differing config digests: " +
                                run.manifest.run_id + " vs " + runs.front().manifest.run_id);
    }
  }

  std::filesystem::create_directories(out_dir);
  std::vector<AgentKind> agents = agents_in(runs);
  std::vector<std::string> models = models_in(runs);

  // model x agent accuracy matrix
  std::vector<AggregateRow> by_model = aggregate(runs, GroupBy::model);
  auto cell = [](const std::vector<AggregateRow>& rows, const std::string& group,
                 AgentKind agent) -> const ScoreSummary* {
    for (const auto& row : rows) {
      if (row.group == group && row.agent == agent) return &row.summary;
    }
    return nullptr;
  };

  {
    std::ostringstream csv;
    csv << "model";
    for (AgentKind agent : agents) csv << "," << to_string(agent);
    csv << "\n";
    for (const auto& model : models) {
      csv << model;
      for (AgentKind agent : agents) {
        const ScoreSummary* summary = cell(by_model, model, agent);
        csv << ",";
        if (summary) csv << format_accuracy(summary->accuracy_ref);
      }
      csv << "\n";
    }
    write_text_file(out_dir + "/scores.csv", csv.str());
  }

  // agent x exam per model
  {
    std::ostringstream csv;
    std::set<std::string> source_set;
    for (const auto& run : runs) {
      for (const auto& attempt : run.baseline) source_set.insert(attempt.source);
    }
    std::vector<std::string> sources(source_set.begin(), source_set.end());
    csv << "model,agent";
    for (const auto& source : sources) csv << "," << source;
    csv << "\n";
    for (const auto& run : runs) {
      std::vector<AggregateRow> by_exam = aggregate({run}, GroupBy::exam);
      for (AgentKind agent : agents) {
        csv << run.manifest.model_id << "," << to_string(agent);
        for (const auto& source : sources) {
          const ScoreSummary* summary = cell(by_exam, source, agent);
          csv << ",";
          if (summary) csv << format_accuracy(summary->accuracy_ref);
        }
        csv << "\n";
      }
    }
    write_text_file(out_dir + "/per_exam.csv", csv.str());
  }

  // McNemar per (model, agent)
  {
    std::ostringstream csv;
    csv << "model,agent,b,c,statistic,p_value,corrected\n";
    for (const auto& run : runs) {
      for (AgentKind agent : agents) {
        if (agent == AgentKind::baseline) continue;
        auto it = run.reanswers.find(agent);
        if (it == run.reanswers.end()) continue;
        ContingencyTable table = contingency(pair_outcomes(run.baseline, it->second));
        csv << run.manifest.model_id << "," << to_string(agent) << "," << table.b << ","
            << table.c << ",";
        if (table.b + table.c > 0) {
          McNemarResult result = mcnemar(table, corrected);
          csv << format_statistic(result.statistic) << "," << format_p(result.p_value);
        } else {
          csv << ",";  // undefined: no discordant pairs
        }
        csv << "," << (corrected ? "true" : "false") << "\n";
      }
    }
    write_text_file(out_dir + "/mcnemar.csv", csv.str());
  }

  // Plot data: agent series, model x agent series, exam x agent series.
  {
    std::ostringstream csv;
    csv << "agent,accuracy\n";
    for (const auto& row : aggregate(runs, GroupBy::agent)) {
      csv << to_string(row.agent) << "," << format_accuracy(row.summary.accuracy_ref) << "\n";
    }
    write_text_file(out_dir + "/plot_accuracy_by_agent.csv", csv.str());
  }
  {
    std::ostringstream csv;
    csv << "model,agent,accuracy\n";
    for (const auto& model : models) {
      for (AgentKind agent : agents) {
        const ScoreSummary* summary = cell(by_model, model, agent);
        if (!summary) continue;
        csv << model << "," << to_string(agent) << ","
            << format_accuracy(summary->accuracy_ref) << "\n";
      }
    }
    write_text_file(out_dir + "/plot_accuracy_by_model_and_agent.csv", csv.str());
  }
  {
    std::ostringstream csv;
    csv << "model,exam,agent,accuracy\n";
    for (const auto& run : runs) {
      for (const auto& row : aggregate({run}, GroupBy::exam)) {
        csv << run.manifest.model_id << "," << row.group << "," << to_string(row.agent) << ","
            << format_accuracy(row.summary.accuracy_ref) << "\n";
      }
    }
    write_text_file(out_dir + "/plot_accuracy_by_exam_and_agent.csv", csv.str());
  }

  // Human-readable summary
  {
    std::ostringstream out;
    out << "Accuracy by model and agent\n";
    for (const auto& model : models) {
      out << "\n" << model << "\n";
      for (AgentKind agent : agents) {
        const ScoreSummary* summary = cell(by_model, model, agent);
        if (!summary) continue;
        out << "  " << to_string(agent) << ": " << format_accuracy(summary->accuracy_ref);
        if (agent != AgentKind::baseline) {
          out << "  (+" << format_accuracy(summary->accuracy_ref - summary->accuracy_base)
              << ")";
        }
        out << "\n";
      }
    }
    write_text_file(out_dir + "/summary.txt", out.str());
  }
}

}  // namespace reflect
