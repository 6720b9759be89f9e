#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "odm/image.hpp"

namespace odm::eval {

// Bare-bones chart rendering for the report subcommand; charts are written
// as PNG with provenance carried in tEXt chunks.

void render_histogram(const std::filesystem::path& path, const std::vector<double>& values,
                      int bins, const std::string& title,
                      const std::map<std::string, std::string>& text_meta = {});

// One or more named series over a shared x axis.
void render_curves(const std::filesystem::path& path, const std::vector<double>& xs,
                   const std::vector<std::vector<double>>& series,
                   const std::vector<std::string>& names, const std::string& title,
                   const std::map<std::string, std::string>& text_meta = {});

// 5x7 bitmap text, uppercase-only glyph set.
void draw_text(Image& canvas, int x, int y, const std::string& text, float r, float g, float b);

}  // namespace odm::eval
