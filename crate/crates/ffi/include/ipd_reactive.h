#ifndef IPD_REACTIVE_H
#define IPD_REACTIVE_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Result code of every fallible call.
 */
typedef enum IpdStatus {
  IPD_STATUS_OK = 0,
  IPD_STATUS_NULL_POINTER = 1,
  IPD_STATUS_INVALID_UTF8 = 2,
  IPD_STATUS_PARSE = 3,
  IPD_STATUS_DOMAIN = 4,
  IPD_STATUS_MEMORY_MISMATCH = 5,
  IPD_STATUS_NON_ERGODIC = 6,
  IPD_STATUS_SOLVER = 7,
  IPD_STATUS_CONFIG = 8,
  IPD_STATUS_UNSUPPORTED = 9,
  IPD_STATUS_IO = 10,
  IPD_STATUS_PANIC = 11,
} IpdStatus;

typedef enum IpdMethod {
  /*
   Explicit donation-game conditions (reactive n <= 3 or counting).
   */
  IPD_METHOD_CLOSED = 0,
  /*
   Exhaustive search over deterministic deviations (n <= 4).
   */
  IPD_METHOD_ALGORITHMIC = 1,
} IpdMethod;

typedef enum IpdSpace {
  IPD_SPACE_REACTIVE = 0,
  IPD_SPACE_COUNTING = 1,
} IpdSpace;

/*
 Opaque strategy handle.
 */
typedef struct IpdStrategy IpdStrategy;

/*
 Stage-game payoffs.
 */
typedef struct IpdGame {
  double r;
  double s;
  double t;
  double p;
} IpdGame;

typedef struct IpdPairResult {
  double payoff1;
  double payoff2;
  double coop1;
  double coop2;
  /*
   Set when a fallback tremble had to be applied.
   */
  bool used_fallback;
} IpdPairResult;

typedef struct IpdEvolveConfig {
  size_t population;
  double beta;
  uint64_t steps;
  size_t memory;
  enum IpdSpace space;
  double b;
  double c;
  uint64_t seed;
  double eps;
} IpdEvolveConfig;

typedef struct IpdRunSummary {
  double avg_coop_rate;
  double partner_abundance;
  uint64_t most_abundant_steps;
} IpdRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message describing the last failure on this thread, or NULL. Valid until the next call.
 */
const char *ipd_last_error(void);

/*
 Parses `tag:n:p1,...` into a new handle stored in `*out`.

 # Safety
 `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IpdStatus ipd_strategy_parse(const char *text, struct IpdStrategy **out_handle);

/*
 Releases a handle. NULL is ignored.

 # Safety
 `handle` must come from [`ipd_strategy_parse`] or [`ipd_evolve`] and not be freed twice.
 */
void ipd_strategy_free(struct IpdStrategy *handle);

/*
 Memory length of a strategy, or 0 for NULL.

 # Safety
 `handle` must be NULL or a live handle.
 */
size_t ipd_strategy_memory(const struct IpdStrategy *handle);

/*
 Serialized form of a strategy; release with [`ipd_string_free`]. NULL on failure.

 # Safety
 `handle` must be NULL or a live handle.
 */
char *ipd_strategy_to_string(const struct IpdStrategy *handle);

/*
 # Safety
 `s` must be NULL or a string returned by this library, freed once.
 */
void ipd_string_free(char *s);

/*
 Donation game with benefit `b` and cost `c`.

 # Safety
 `out_game` must be a valid pointer.
 */
enum IpdStatus ipd_donation_game(double b, double c, struct IpdGame *out_game);

/*
 Long-run payoffs and cooperation rates of `s1` against `s2`.

 # Safety
 All pointers must be valid.
 */
enum IpdStatus ipd_payoffs(const struct IpdStrategy *s1,
                           const struct IpdStrategy *s2,
                           const struct IpdGame *game,
                           double eps,
                           struct IpdPairResult *out_result);

/*
 Partner verdict for a reactive or counting strategy.

 # Safety
 All pointers must be valid.
 */
enum IpdStatus ipd_partner_check(const struct IpdStrategy *strategy,
                                 const struct IpdGame *game,
                                 enum IpdMethod method,
                                 double tol,
                                 bool *out_is_partner);

/*
 Highest long-run payoff any co-player can earn against `strategy`.

 # Safety
 All pointers must be valid.
 */
enum IpdStatus ipd_best_response(const struct IpdStrategy *strategy,
                                 const struct IpdGame *game,
                                 double *out_payoff);

/*
 Fixation probability of a single mutant; `mutant[k-1]` and `resident[k-1]`
 hold the payoffs with `k` mutants, for `k = 1..population-1`.

 # Safety
 `mutant` and `resident` must each point to `population - 1` doubles.
 */
enum IpdStatus ipd_fixation_probability(const double *mutant,
                                        const double *resident,
                                        size_t population,
                                        double beta,
                                        double *out_phi);

/*
 Runs one simulation. If `out_most_abundant` is not NULL it receives a new
 handle to the most abundant resident.

 # Safety
 `config` and `out_summary` must be valid; `out_most_abundant` may be NULL.
 */
enum IpdStatus ipd_evolve(const struct IpdEvolveConfig *config,
                          struct IpdRunSummary *out_summary,
                          struct IpdStrategy **out_most_abundant);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IPD_REACTIVE_H */
