#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tlnet/autodiff.hpp"

namespace tlnet {

enum class OptimizerKind { adam, sgd };

/// Named trainable parameters plus per-parameter Adam state. Iteration order
/// is the name order (std::map), so steps and checkpoints are deterministic.
class ParamStore {
  public:
    VarPtr create(const std::string& name, Tensor4 init);
    VarPtr get(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) != 0; }

    std::vector<std::string> names() const;
    const std::map<std::string, VarPtr>& all() const { return params_; }

    void zero_grad();

    /// L2 penalty gradient (l2_decay * value) is added before the update.
    /// Adam uses (beta1=0.9, beta2=0.999, eps=1e-8) with bias correction.
    void step(OptimizerKind kind, double learning_rate, double l2_decay);

    void save(std::ostream& os) const;
    void load(std::istream& is);
    void save_file(const std::string& path) const;
    void load_file(const std::string& path);

  private:
    struct AdamState {
        Tensor4 m, v;
        long t = 0;
    };
    std::map<std::string, VarPtr> params_;
    std::map<std::string, AdamState> adam_;
};

}  // namespace tlnet
