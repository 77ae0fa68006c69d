#pragma once

#include <random>
#include <string>
#include <vector>

#include "promptlint/ast.hpp"
#include "promptlint/astdiff.hpp"

namespace testutil {

/// Mirror of the tree the parser should produce, with stable per-node ids so
/// a mutated copy can be diffed analytically against the original.
struct plan_item {
    promptlint::node_kind kind = promptlint::node_kind::paragraph;
    int id = 0;
    int level = 0;  // sections only
    std::string text;
    std::vector<plan_item> children;
};

struct doc_plan {
    std::vector<plan_item> items;
    int next_id = 1;
    int next_token = 1;
};

doc_plan make_plan(std::mt19937& rng);
std::string render(const doc_plan& plan);
std::string make_document(std::mt19937& rng);

/// Asserts the parsed tree matches the plan node for node; returns a list of
/// mismatch descriptions (empty when faithful).
std::vector<std::string> verify_plan(const doc_plan& plan,
                                     const promptlint::node& root);

enum class mutation_kind { edit, insert, erase, swap_adjacent };

struct mutation_case {
    mutation_kind kind = mutation_kind::edit;
    std::string old_text;
    std::string new_text;
    /// Complete expected change set in diff output order: every old node in
    /// document order, then added nodes in new-document order.
    std::vector<promptlint::change_entry> expected;
    /// edit: path of the edited node (old == new position).
    std::vector<int> edited_path;
    /// swap_adjacent: old paths of the two swapped subtree roots; each
    /// lands at the other's position in the new tree.
    std::vector<int> swapped_a;
    std::vector<int> swapped_b;
};

/// A random document plus one random applicable mutation.
mutation_case make_mutation_case(std::mt19937& rng);

/// Same, forcing the mutation kind; regenerates documents until one admits it.
mutation_case make_mutation_case(std::mt19937& rng, mutation_kind force);

std::string describe(const std::vector<promptlint::change_entry>& entries);

}  // namespace testutil
