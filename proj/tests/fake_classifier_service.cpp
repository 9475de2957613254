// Stand-in inference process for the external classifier protocol.
//   fake_classifier_service [--exit-after N] [--garbage] label...
// Scores each label by how often it occurs in the request text; ties keep the
// command-line order.

#include <json.hpp>

#include <algorithm>
#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
    std::vector<std::string> labels;
    long exit_after = -1;
    bool garbage = false;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--exit-after" && i + 1 < argc) exit_after = std::stol(argv[++i]);
        else if (a == "--garbage") garbage = true;
        else labels.push_back(a);
    }
    std::string line;
    long served = 0;
    while (std::getline(std::cin, line)) {
        if (exit_after >= 0 && served >= exit_after) return 3;
        ++served;
        if (garbage) {
            std::cout << "not json\n" << std::flush;
            continue;
        }
        const auto req = nlohmann::json::parse(line);
        const auto text = req.at("text").get<std::string>();
        std::vector<std::pair<std::string, double>> scored;
        for (const auto& l : labels) {
            double n = 0;
            for (auto pos = text.find(l); pos != std::string::npos; pos = text.find(l, pos + 1)) n += 1;
            scored.emplace_back(l, n);
        }
        std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        nlohmann::json resp;
        resp["ranked"] = nlohmann::json::array();
        for (const auto& [l, s] : scored) resp["ranked"].push_back({l, s});
        std::cout << resp.dump() << '\n' << std::flush;
    }
    return 0;
}
