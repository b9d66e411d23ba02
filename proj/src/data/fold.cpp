#include "dmnet/data/fold.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dmnet/error.hpp"

namespace dmnet {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

bool FoldSpec::is_training_class(int class_id) const {
    return std::find(training_classes.begin(), training_classes.end(), class_id) !=
           training_classes.end();
}

bool FoldSpec::is_testing_class(int class_id) const {
    return std::find(testing_classes.begin(), testing_classes.end(), class_id) !=
           testing_classes.end();
}

int FoldSpec::train_slot(int class_id) const {
    for (size_t i = 0; i < training_classes.size(); ++i)
        if (training_classes[i] == class_id) return static_cast<int>(i);
    throw IndexError("class id " + std::to_string(class_id) + " is not a training class of fold " +
                     std::to_string(fold_id));
}

const std::string& FoldSpec::name_of(int class_id) const {
    if (class_id < 1 || class_id > static_cast<int>(class_names.size()))
        throw IndexError("class id " + std::to_string(class_id) + " out of range");
    return class_names[class_id - 1];
}

int FoldSpec::id_of(const std::string& name) const {
    for (size_t i = 0; i < class_names.size(); ++i)
        if (class_names[i] == name) return static_cast<int>(i) + 1;
    return 0;
}

FoldSpec parse_fold_spec_text(const std::string& text, int fold_id, const std::string& origin) {
    std::vector<std::string> classes;
    std::vector<std::string> train_names, test_names;
    bool in_target_fold = false;
    bool fold_found = false;

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') throw SpecError(where + ": malformed section header");
            std::istringstream hs(trim(line.substr(1, line.size() - 2)));
            std::string word;
            int id = -1;
            hs >> word >> id;
            if (word != "fold" || id < 0) throw SpecError(where + ": expected [fold <n>]");
            in_target_fold = (id == fold_id);
            fold_found = fold_found || in_target_fold;
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) throw SpecError(where + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "classes") {
            classes = split_list(value);
        } else if (key == "train") {
            if (in_target_fold) train_names = split_list(value);
        } else if (key == "test") {
            if (in_target_fold) test_names = split_list(value);
        } else {
            throw SpecError(where + ": unknown key '" + key + "'; valid keys: classes, train, test");
        }
    }

    if (classes.empty()) throw SpecError(origin + ": missing 'classes' declaration");
    for (size_t i = 0; i < classes.size(); ++i)
        for (size_t j = i + 1; j < classes.size(); ++j)
            if (classes[i] == classes[j])
                throw SpecError(origin + ": duplicate class name '" + classes[i] + "'");
    if (!fold_found)
        throw SpecError(origin + ": fold " + std::to_string(fold_id) + " not declared");
    if (train_names.empty() || test_names.empty())
        throw SpecError(origin + ": fold " + std::to_string(fold_id) +
                        " must declare non-empty train and test lists");

    FoldSpec spec;
    spec.fold_id = fold_id;
    spec.class_names = classes;
    auto resolve = [&](const std::vector<std::string>& names, std::vector<int>& ids) {
        for (const auto& n : names) {
            const int id = spec.id_of(n);
            if (id == 0) throw SpecError(origin + ": class '" + n + "' not in 'classes' list");
            ids.push_back(id);
        }
    };
    resolve(train_names, spec.training_classes);
    resolve(test_names, spec.testing_classes);

    for (int t : spec.training_classes)
        if (spec.is_testing_class(t))
            throw SpecError(origin + ": class '" + spec.name_of(t) +
                            "' appears in both train and test lists of fold " +
                            std::to_string(fold_id));
    return spec;
}

FoldSpec load_fold_spec(const std::string& path, int fold_id) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError("cannot open fold spec file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_fold_spec_text(ss.str(), fold_id, path);
}

}  // namespace dmnet
