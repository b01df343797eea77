#pragma once

#include <map>
#include <string>
#include <vector>

#include "reflect/pipeline.hpp"

namespace reflect {

/// Per-question (baseline, re-answer) verdict pair. Baseline-correct
/// questions are never re-asked; their re-answer verdict is carried forward
/// as correct.
struct OutcomePair {
  std::string source;
  std::int64_t source_id = 0;
  Verdict baseline = Verdict::incorrect;
  Verdict reanswer = Verdict::incorrect;
};

/// Accuracy per the carry-forward definition: the reflecting agent's correct
/// re-answers are added on top of the baseline score over the same total.
struct ScoreSummary {
  long correct_base = 0;
  long correct_ref = 0;
  long total_base = 0;
  double accuracy_base = 0.0;
  double accuracy_ref = 0.0;
};

/// 2x2 paired-outcome table: a = both incorrect, b = incorrect->correct,
/// c = correct->incorrect (structurally zero here), d = both correct.
struct ContingencyTable {
  long a = 0;
  long b = 0;
  long c = 0;
  long d = 0;

  long total() const { return a + b + c + d; }
};

struct McNemarResult {
  double statistic = 0.0;
  bool corrected = true;
  double p_value = 1.0;
  int df = 1;
};

/// Joins baseline attempts with one agent's re-answer attempts. Every
/// baseline-incorrect problem must have exactly one re-answer attempt;
/// erred verdicts pass through and score as incorrect.
std::vector<OutcomePair> pair_outcomes(const std::vector<Attempt>& baseline,
                                       const std::vector<Attempt>& reanswers);

ScoreSummary score(const std::vector<OutcomePair>& outcomes);

/// Baseline-only summary (accuracy_ref collapses to accuracy_base).
ScoreSummary score_baseline(const std::vector<Attempt>& baseline);

ContingencyTable contingency(const std::vector<OutcomePair>& outcomes);

/// McNemar test on the discordant cells. The corrected form is
/// (|b-c|-1)^2/(b+c), the uncorrected form (b-c)^2/(b+c); p is the
/// upper-tail chi-square probability at df=1. Throws std::domain_error when
/// b + c = 0 (no discordant pairs, test undefined).
McNemarResult mcnemar(const ContingencyTable& table, bool corrected = true);

/// Survival function of the chi-square distribution with one degree of
/// freedom, via sf(x) = erfc(sqrt(x/2)).
double chi2_sf(double x);

/// A completed run loaded back from its artifact files.
struct RunData {
  RunManifest manifest;
  std::vector<Attempt> baseline;
  std::map<AgentKind, std::vector<Attempt>> reanswers;
};

RunData load_run(const std::string& run_dir);

enum class GroupBy { model, agent, exam };

struct AggregateRow {
  std::string group;  // model id, agent name, or problem source set
  AgentKind agent = AgentKind::baseline;
  ScoreSummary summary;
};

/// One ScoreSummary per (group, agent) cell. Exam grouping keys on each
/// problem's source set; agent grouping pools outcomes across runs.
std::vector<AggregateRow> aggregate(const std::vector<RunData>& runs, GroupBy group_by);

/// Structural invariants every harness-produced run must satisfy: one
/// baseline attempt per problem, re-answers only (and exactly once) for
/// baseline-incorrect problems, contingency c = 0, and
/// accuracy_ref >= accuracy_base for every completed agent.
struct ValidationReport {
  bool ok = true;
  std::vector<std::string> violations;
};

ValidationReport validate_run(const RunData& run, const Exam* exam = nullptr);

class DigestMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes scores.csv, per_exam.csv, mcnemar.csv, the three plot-data CSVs,
/// and summary.txt into out_dir. Refuses to mix runs whose config digests
/// differ.
void write_reports(const std::vector<RunData>& runs, const std::string& out_dir,
                   bool corrected = true);

std::string format_accuracy(double value);  // 3 decimals, as reported

}  // namespace reflect
