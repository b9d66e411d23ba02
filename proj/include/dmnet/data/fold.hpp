#pragma once

#include <string>
#include <vector>

namespace dmnet {

// One train/test class split. Class ids are 1-based (0 is background in mask
// files); `class_names[id-1]` is the declared name of class `id`.
struct FoldSpec {
    int fold_id = 0;
    std::vector<std::string> class_names;
    std::vector<int> training_classes;  // ids, in declared order
    std::vector<int> testing_classes;

    int n_known() const { return static_cast<int>(training_classes.size()); }
    bool is_training_class(int class_id) const;
    bool is_testing_class(int class_id) const;
    // Memory row for a training class; IndexError for non-training ids.
    int train_slot(int class_id) const;
    const std::string& name_of(int class_id) const;
    int id_of(const std::string& name) const;  // 0 if unknown
};

// File format:
//   classes = name1, name2, ...      (pixel value = 1-based position)
//   [fold 0]
//   train = name, name, ...
//   test  = name, name, ...
FoldSpec load_fold_spec(const std::string& path, int fold_id);
FoldSpec parse_fold_spec_text(const std::string& text, int fold_id, const std::string& origin);

}  // namespace dmnet
