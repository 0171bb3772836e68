#include "fruitnet/history_csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace fruitnet {

namespace {

constexpr const char* kHeader = "epoch,train_loss,train_acc,test_loss,test_acc,lr,seconds";

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace

std::string history_to_csv(const TrainHistory& history) {
    std::string out = kHeader;
    out += '\n';
    for (const auto& row : history) {
        out += std::to_string(row.epoch);
        for (double v : {row.train_loss, row.train_acc, row.test_loss, row.test_acc, row.eta,
                         row.seconds}) {
            out += ',';
            out += fmt6(v);
        }
        out += '\n';
    }
    return out;
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& file) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + file.string() + " for writing");
    os << history_to_csv(history);
    if (!os) throw std::runtime_error("failed writing " + file.string());
}

TrainHistory read_history_csv(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open history file " + file.string());

    std::string line;
    if (!std::getline(is, line) || line != kHeader)
        throw std::runtime_error(file.string() + ": row 1: expected header '" +
                                 std::string(kHeader) + "'");

    TrainHistory history;
    int row_no = 1;
    while (std::getline(is, line)) {
        ++row_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t pos = line.find(',', start);
            fields.push_back(line.substr(start, pos - start));
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        const auto bad = [&](const std::string& why) {
            return std::runtime_error(file.string() + ": row " + std::to_string(row_no) +
                                      ": " + why);
        };
        if (fields.size() != 7) throw bad("expected 7 fields, got " +
                                          std::to_string(fields.size()));
        EpochStats row;
        try {
            std::size_t used = 0;
            row.epoch = std::stoi(fields[0], &used);
            if (used != fields[0].size()) throw bad("bad epoch field");
            double* slots[6] = {&row.train_loss, &row.train_acc, &row.test_loss,
                                &row.test_acc,  &row.eta,       &row.seconds};
            for (int i = 0; i < 6; ++i) {
                *slots[i] = std::stod(fields[static_cast<std::size_t>(i) + 1], &used);
                if (used != fields[static_cast<std::size_t>(i) + 1].size())
                    throw bad("bad numeric field " + std::to_string(i + 2));
            }
        } catch (const std::runtime_error&) {
            throw;
        } catch (const std::exception&) {
            throw bad("malformed");
        }
        history.push_back(row);
    }
    if (history.empty())
        throw std::runtime_error(file.string() + ": no data rows");
    return history;
}

}  // namespace fruitnet
