#include "refinery/mcts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace refinery {

const char* node_type_name(NodeType t) {
    switch (t) {
        case NodeType::Init: return "Init";
        case NodeType::Gen: return "Gen";
        case NodeType::Fix: return "Fix";
        case NodeType::Success: return "Success";
    }
    return "?";
}

void SearchConfig::check() const {
    if (num_rollouts < 1) throw Error("search config: num_rollouts must be >= 1");
    if (max_depth < 1) throw Error("search config: max_depth must be >= 1");
    if (gen_children < 1) throw Error("search config: gen_children must be >= 1");
    if (fix_children < 1) throw Error("search config: fix_children must be >= 1");
    if (reward_weight < 0) throw Error("search config: reward_weight must be >= 0");
}

double uct_score(const SearchNode& child, std::int64_t parent_visits, double uct_c) {
    if (child.visits == 0) return std::numeric_limits<double>::infinity();
    double mean = child.q_value / static_cast<double>(child.visits);
    if (uct_c == 0.0 || parent_visits <= 0) return mean;
    return mean + uct_c * std::sqrt(std::log(static_cast<double>(parent_visits)) /
                                    static_cast<double>(child.visits));
}

double node_reward(double c_prev, double s_prev, double c_curr, double s_curr, double w) {
    return (c_curr - c_prev) + w * (s_curr - s_prev);
}

void backpropagate(const std::vector<SearchNode*>& path) {
    double suffix = 0.0;
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
        SearchNode* node = *it;
        node->visits += 1;
        node->q_value += suffix;
        suffix += node->edge_reward;
    }
}

namespace {

void collect_success(const SearchNode& node, std::vector<const SearchNode*>& out) {
    if (node.node_type == NodeType::Success) out.push_back(&node);
    for (const auto& c : node.children) collect_success(*c, out);
}

}  // namespace

const SearchNode* find_best_solution(const SearchNode& root) {
    std::vector<const SearchNode*> successes;
    collect_success(root, successes);
    if (successes.empty()) return &root;
    const SearchNode* best = successes.front();
    for (const SearchNode* n : successes) {
        double sn = n->safety.value_or(0.0);
        double sb = best->safety.value_or(0.0);
        if (sn > sb) {
            best = n;
        } else if (sn == sb) {
            if (n->depth < best->depth || (n->depth == best->depth && n->id < best->id)) best = n;
        }
    }
    return best;
}

std::string dump_tree_json(const SearchNode& root) {
    nlohmann::json nodes = nlohmann::json::array();
    std::vector<const SearchNode*> stack{&root};
    while (!stack.empty()) {
        const SearchNode* n = stack.back();
        stack.pop_back();
        nlohmann::json rec{{"id", n->id},
                           {"parent", n->parent ? nlohmann::json(n->parent->id) : nlohmann::json()},
                           {"type", node_type_name(n->node_type)},
                           {"depth", n->depth},
                           {"edge_reward", n->edge_reward},
                           {"q", n->q_value},
                           {"visits", n->visits},
                           {"materialized", n->materialized},
                           {"dead", n->dead}};
        if (n->safety) rec["safety"] = *n->safety;
        if (n->materialized && !n->dead) rec["compile_score"] = n->compile_value;
        if (n->action) rec["model"] = n->action->model_id;
        nodes.push_back(std::move(rec));
        for (const auto& c : n->children) stack.push_back(c.get());
    }
    return nlohmann::json{{"nodes", nodes}}.dump(2);
}

MctsEngine::MctsEngine(ModelPool& pool, Validator& validator, const SafetyBaseline& baseline,
                       SearchConfig config, CallObserver observer)
    : pool_(pool), validator_(validator), baseline_(baseline), config_(std::move(config)),
      observer_(std::move(observer)) {
    config_.check();
    if (pool_.size() == 0) throw Error("mcts engine: empty model pool");
}

SearchNode* MctsEngine::add_child(SearchNode& parent, NodeType type) {
    auto child = std::make_unique<SearchNode>();
    child->node_type = type;
    child->id = ++next_node_id_;
    child->depth = parent.depth + 1;
    child->parent = &parent;
    parent.children.push_back(std::move(child));
    return parent.children.back().get();
}

std::vector<SearchNode*> MctsEngine::select(SearchNode& root) const {
    std::vector<SearchNode*> path{&root};
    SearchNode* cur = &root;
    while (true) {
        if (cur->terminal() || !cur->materialized) break;
        if (cur->depth >= config_.max_depth) break;
        if (cur->children.empty()) break;
        SearchNode* next = nullptr;
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& c : cur->children) {
            if (c->dead) continue;
            double score = uct_score(*c, cur->visits, config_.uct_c);
            if (score > best) {
                best = score;
                next = c.get();
            }
        }
        if (!next) break;  // every child dead
        path.push_back(next);
        cur = next;
    }
    return path;
}

void MctsEngine::expand(SearchNode& node, const FunctionUnit& unit,
                        const std::vector<TestCase>& suite) {
    if (node.terminal()) return;
    if (node.node_type == NodeType::Init) {
        if (!node.children.empty() || node.depth >= config_.max_depth) return;
        const auto& ids = pool_.ids();
        for (int i = 0; i < config_.gen_children; ++i) {
            SearchNode* child = add_child(node, NodeType::Gen);
            child->action = RefinementAction{ActionKind::NoFeedback, ids[static_cast<std::size_t>(i) % ids.size()]};
            child->conversation = conversation_for(unit);
        }
        return;
    }
    if (!node.materialized) materialize(node, unit, suite);
}

void MctsEngine::materialize(SearchNode& node, const FunctionUnit& unit,
                             const std::vector<TestCase>& suite) {
    node.materialized = true;
    SearchNode& parent = *node.parent;

    CallRecord record;
    record.node_id = node.id;
    record.function_id = unit.id;
    record.model_id = node.action->model_id;
    record.seed = config_.seed + call_index_++;
    record.conversation = node.conversation;

    auto mark_dead = [&] {
        node.dead = true;
        node.edge_reward = -1.0;
    };

    GenerateResult gen;
    try {
        gen = pool_.generate(record.model_id, node.conversation, record.seed);
    } catch (const TransportError&) {
        record.failed = true;
        if (observer_) observer_(record);
        mark_dead();
        return;
    }
    record.response = gen.text;
    record.usage = gen.usage;
    if (observer_) observer_(record);

    node.conversation = node.conversation.extended({Role::Assistant, gen.text});

    std::string body;
    try {
        body = postprocess(gen.text);
        node.program = substitute(*parent.program, unit.id, body);
    } catch (const Error&) {
        mark_dead();
        return;
    }
    node.body = std::move(body);

    node.validation = validator_.validate(*node.program, suite);
    const bool compiled = node.validation->compile.success;
    const double c_curr = compile_score(node.validation->compile);
    const double s_curr = safety_ratio(count_constructs(*node.program), baseline_, compiled);
    node.compile_value = c_curr;
    node.safety = s_curr;
    node.edge_reward =
        node_reward(parent.compile_value, parent.safety.value_or(0.0), c_curr, s_curr,
                    config_.reward_weight);

    if (node.depth + 1 > config_.max_depth) return;  // depth cap: leaf

    if (compiled) {
        const bool tests_pass = suite.empty() || is_equivalent(node.validation->tests.value_or(
                                                     std::vector<TestOutcome>{}));
        if (tests_pass) {
            SearchNode* s = add_child(node, NodeType::Success);
            s->body = node.body;
            s->program = node.program;
            s->conversation = node.conversation;
            s->materialized = true;
            s->compile_value = node.compile_value;
            s->safety = node.safety;
            s->edge_reward = 0.0;  // marker transition; program unchanged
        } else {
            attach_fix_children(node);
        }
    } else {
        attach_fix_children(node);
    }
}

void MctsEngine::attach_fix_children(SearchNode& node) {
    std::string feedback = make_feedback_message(*node.validation);
    for (int i = 0; i < config_.fix_children; ++i) {
        SearchNode* child = add_child(node, NodeType::Fix);
        child->action = RefinementAction{ActionKind::WithFeedback, node.action->model_id};
        child->conversation = node.conversation.extended({Role::User, feedback});
    }
}

std::vector<SearchNode*> MctsEngine::simulate(SearchNode& leaf, const FunctionUnit& unit,
                                              const std::vector<TestCase>& suite) {
    std::vector<SearchNode*> path;
    SearchNode* cur = &leaf;
    while (true) {
        if (cur->terminal() || cur->depth >= config_.max_depth) break;
        if (!cur->materialized) break;  // nothing to descend into
        if (cur->children.empty()) break;
        for (auto& c : cur->children) {
            if (!c->materialized && !c->dead) materialize(*c, unit, suite);
        }
        SearchNode* next = nullptr;
        for (auto& c : cur->children) {
            if (c->dead) continue;
            if (!next || c->edge_reward > next->edge_reward) next = c.get();
        }
        if (!next) break;
        path.push_back(next);
        cur = next;
    }
    return path;
}

SearchResult MctsEngine::search(const FunctionUnit& unit, const ProjectSnapshot& program,
                                const std::vector<TestCase>& suite) {
    next_node_id_ = 0;
    call_index_ = 0;

    auto root = std::make_unique<SearchNode>();
    root->node_type = NodeType::Init;
    root->id = 0;
    root->depth = 0;
    root->program = program;
    root->materialized = true;  // the root is the input state; no model call
    root->compile_value = 1.0;  // precondition: current program compiles
    root->safety = safety_ratio(count_constructs(program), baseline_, true);

    const auto usage_before = pool_.usage();
    int rollouts = 0;
    for (int i = 1; i <= config_.num_rollouts; ++i) {
        auto path_s = select(*root);
        SearchNode* leaf = path_s.back();
        expand(*leaf, unit, suite);
        auto path_r = simulate(*leaf, unit, suite);
        path_s.insert(path_s.end(), path_r.begin(), path_r.end());
        backpropagate(path_s);
        rollouts = i;
        if (config_.early_exit) {
            const SearchNode* best = find_best_solution(*root);
            if (best->node_type == NodeType::Success && best->safety.value_or(0.0) >= 1.0) break;
        }
    }

    SearchResult result;
    result.best = find_best_solution(*root);
    result.found_success = result.best->node_type == NodeType::Success;
    result.rollouts_used = rollouts;
    result.usage = {pool_.usage().queries - usage_before.queries,
                    pool_.usage().tokens - usage_before.tokens};

    std::vector<const SearchNode*> stack{root.get()};
    while (!stack.empty()) {
        const SearchNode* n = stack.back();
        stack.pop_back();
        switch (n->node_type) {
            case NodeType::Init: ++result.tree_stats.init_nodes; break;
            case NodeType::Gen: ++result.tree_stats.gen_nodes; break;
            case NodeType::Fix: ++result.tree_stats.fix_nodes; break;
            case NodeType::Success: ++result.tree_stats.success_nodes; break;
        }
        if (n->dead) ++result.tree_stats.dead_nodes;
        result.tree_stats.max_depth_reached = std::max(result.tree_stats.max_depth_reached, n->depth);
        for (const auto& c : n->children) stack.push_back(c.get());
    }
    result.root = std::move(root);
    return result;
}

}  // namespace refinery
