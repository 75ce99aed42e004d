#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "refinery/code_model.hpp"
#include "refinery/refiner.hpp"
#include "refinery/safety.hpp"
#include "refinery/validation.hpp"

namespace refinery {

enum class NodeType { Init, Gen, Fix, Success };

const char* node_type_name(NodeType t);

/// One node of the refinement search tree. Gen/Fix nodes start as
/// placeholders and issue their model call when first materialized, so
/// cost is only paid for explored branches.
struct SearchNode {
    NodeType node_type = NodeType::Init;
    std::int64_t id = 0;  // creation order within one search
    int depth = 0;

    std::optional<std::string> body;           // candidate text; absent on Init
    std::optional<ProjectSnapshot> program;    // present once materialized
    Conversation conversation;
    std::optional<RefinementAction> action;    // absent on Init

    double edge_reward = 0.0;  // R for the edge from parent
    double q_value = 0.0;      // accumulated reward Q(n)
    std::int64_t visits = 0;   // visit count N(n)

    bool materialized = false;
    bool dead = false;  // extraction/transport failure; excluded from selection

    std::optional<ValidationResult> validation;
    std::optional<double> safety;  // S of program
    double compile_value = 0.0;    // C of program; valid once materialized

    SearchNode* parent = nullptr;
    std::vector<std::unique_ptr<SearchNode>> children;

    bool terminal() const { return node_type == NodeType::Success || dead; }
};

struct SearchConfig {
    int num_rollouts = 10;
    double uct_c = 1.5;
    int max_depth = 5;
    int gen_children = 4;   // initial candidates, split round-robin over the pool
    int fix_children = 2;   // repair fan-out per failed validation
    double reward_weight = 2.0;
    std::uint64_t seed = 0;
    bool early_exit = false;  // stop once a Success with S == 1.0 exists

    void check() const;
};

struct TreeStats {
    int init_nodes = 0;
    int gen_nodes = 0;
    int fix_nodes = 0;
    int success_nodes = 0;
    int dead_nodes = 0;
    int max_depth_reached = 0;
    int total() const { return init_nodes + gen_nodes + fix_nodes + success_nodes; }
};

struct SearchResult {
    std::unique_ptr<SearchNode> root;  // the full tree, for inspection/dump
    const SearchNode* best = nullptr;  // Success node or root (fallback)
    bool found_success = false;
    int rollouts_used = 0;
    UsageRecord usage;  // this search's share of pool usage
    TreeStats tree_stats;
};

/// UCT selection score: +inf for unvisited children, else mean accumulated
/// reward plus the exploration bonus c * sqrt(ln N_parent / N_child).
double uct_score(const SearchNode& child, std::int64_t parent_visits, double uct_c);

/// Reward for a transition: (C_curr - C_prev) + w * (S_curr - S_prev), so
/// edge sums telescope to the total improvement along a trajectory.
double node_reward(double c_prev, double s_prev, double c_curr, double s_curr, double w);

/// Visits += 1 along the path; each node's Q accumulates the edge rewards
/// from itself to the path's end (its own edge is accounted at the parent).
void backpropagate(const std::vector<SearchNode*>& path);

/// Highest-safety Success node; ties to the shallower then earlier node.
/// Returns the root when no Success exists.
const SearchNode* find_best_solution(const SearchNode& root);

std::string dump_tree_json(const SearchNode& root);

/// UCT-guided refinement search over model-generated candidates.
class MctsEngine {
public:
    MctsEngine(ModelPool& pool, Validator& validator, const SafetyBaseline& baseline,
               SearchConfig config, CallObserver observer = {});

    /// Runs the configured number of rollouts from the given program state
    /// and returns the best solution found (the root when none).
    SearchResult search(const FunctionUnit& unit, const ProjectSnapshot& program,
                        const std::vector<TestCase>& suite);

    /// UCT descent from the root to a leaf: stops at an unexpanded,
    /// unmaterialized, terminal, or depth-capped node. Returns the full
    /// path including the root. Dead children are never entered.
    std::vector<SearchNode*> select(SearchNode& root) const;

    /// Init: creates the Gen placeholders (once). Unmaterialized Gen/Fix:
    /// materializes it, which issues the model call, validates, computes the
    /// edge reward and attaches children (Success or Fix) as the outcome
    /// dictates. At max depth no children are attached.
    void expand(SearchNode& node, const FunctionUnit& unit, const std::vector<TestCase>& suite);

    /// Greedy descent: materializes the current node's children and follows
    /// the highest edge reward until a terminal or depth-capped node.
    /// Returns the traversed path (empty when the leaf is already terminal).
    std::vector<SearchNode*> simulate(SearchNode& leaf, const FunctionUnit& unit,
                                      const std::vector<TestCase>& suite);

    const SearchConfig& config() const { return config_; }

private:
    void materialize(SearchNode& node, const FunctionUnit& unit, const std::vector<TestCase>& suite);
    void attach_fix_children(SearchNode& node);
    SearchNode* add_child(SearchNode& parent, NodeType type);

    ModelPool& pool_;
    Validator& validator_;
    const SafetyBaseline& baseline_;
    SearchConfig config_;
    CallObserver observer_;
    std::int64_t next_node_id_ = 0;
    std::uint64_t call_index_ = 0;
    const FunctionUnit* unit_ = nullptr;
};

}  // namespace refinery
