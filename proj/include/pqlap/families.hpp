#pragma once

#include "pqlap/operators.hpp"

#include <map>
#include <string>
#include <vector>

namespace pqlap {

using ParamMap = std::map<std::string, double>;

/// Built-in weights:
///   constant     {value}        g(t) = value
///   quadratic    {a, b}         g(t) = a + b t^2
///   exponential  {a, k}         g(t) = a exp(k |t|)
WeightFunction<double> make_weight(const std::string& name, const ParamMap& params);

/// Built-in convection families. Declared hypothesis constants are derived
/// from the parameters and the exponent p.
///   zero           {c0}
///   constant       {value, c0}
///   paper_example  {alpha, h, c0, forcing}
///       f = |s|^{alpha-2}s + s/(1+s^2) (|xi|^{p-1} + h) + forcing
///   adversarial    {a0, c0}
///       f = 2 a0 |xi|^p sign(s) / (1 + |s|)
ConvectionFamily<double> make_convection(const std::string& name, const ParamMap& params, double p);

std::vector<std::string> weight_names();
std::vector<std::string> convection_names();

/// Parameter keys each family accepts (used to reject unknown keys).
std::vector<std::string> weight_param_keys(const std::string& name);
std::vector<std::string> convection_param_keys(const std::string& name);

}  // namespace pqlap
