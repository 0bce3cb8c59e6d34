#include <cmath>
#include <sstream>

#include "gridverify/linmodel.hpp"

namespace gridverify {

namespace {

void append_terms(std::ostringstream& out, const std::vector<std::pair<int, double>>& terms) {
    bool first = true;
    for (const auto& [v, coef] : terms) {
        if (coef == 0.0) continue;
        double mag = std::abs(coef);
        if (first) {
            if (coef < 0) out << "- ";
            first = false;
        } else {
            out << (coef < 0 ? " - " : " + ");
        }
        out << format_double(mag) << " x" << v;
    }
    if (first) out << "0 x0";  // canonical empty expression
}

}  // namespace

std::string export_lp_format(const LinearModel& model) {
    std::ostringstream out;
    out << (model.sense() == Sense::Maximize ? "Maximize\n" : "Minimize\n");
    out << " obj:";
    std::vector<std::pair<int, double>> obj_terms;
    for (int v = 0; v < model.n_vars(); ++v)
        if (model.objective()[v] != 0.0) obj_terms.emplace_back(v, model.objective()[v]);
    if (!obj_terms.empty()) {
        out << " ";
        append_terms(out, obj_terms);
    }
    out << "\nSubject To\n";
    for (int r = 0; r < model.n_rows(); ++r) {
        const auto& row = model.row(r);
        out << " c" << r << ": ";
        append_terms(out, row.terms);
        switch (row.rel) {
            case Relation::LessEq: out << " <= "; break;
            case Relation::Equal: out << " = "; break;
            case Relation::GreaterEq: out << " >= "; break;
        }
        out << format_double(row.rhs) << "\n";
    }
    if (model.n_vars() > 0) {
        out << "Bounds\n";
        for (int v = 0; v < model.n_vars(); ++v) {
            double lo = model.lower(v), up = model.upper(v);
            bool lo_fin = std::isfinite(lo), up_fin = std::isfinite(up);
            out << " ";
            if (lo_fin && up_fin) {
                if (lo == up)
                    out << "x" << v << " = " << format_double(lo);
                else
                    out << format_double(lo) << " <= x" << v << " <= " << format_double(up);
            } else if (lo_fin) {
                out << "x" << v << " >= " << format_double(lo);
            } else if (up_fin) {
                out << "-inf <= x" << v << " <= " << format_double(up);
            } else {
                out << "x" << v << " free";
            }
            out << "\n";
        }
    }
    if (!model.binary_vars().empty()) {
        out << "Binaries\n";
        for (int v : model.binary_vars()) out << " x" << v;
        out << "\n";
    }
    out << "End\n";
    return out.str();
}

}  // namespace gridverify
