#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hkfr/jsonl.hpp"

namespace hkfr {

// A recommendable thing: a category name, a merchant/POI, a product, or a price band.
struct CatalogEntry {
    std::string id;
    std::string display;
    std::string kind;  // "category" | "merchant" | "product" | "price_band"
    std::string category;
    std::optional<std::int64_t> price_minor;
};

struct PriceBand {
    std::string id;
    std::string display;
    std::int64_t min_minor;
    std::int64_t max_minor;  // inclusive; INT64_MAX for the open-ended top band
};

struct Catalog {
    std::vector<std::string> categories;  // fixed order, drives one-hot encodings
    std::vector<CatalogEntry> merchants;
    std::vector<CatalogEntry> products;
    std::vector<PriceBand> price_bands;

    std::vector<CatalogEntry> category_entries() const {
        std::vector<CatalogEntry> out;
        out.reserve(categories.size());
        for (const auto& c : categories) {
            out.push_back({c, c, "category", c, std::nullopt});
        }
        return out;
    }

    std::vector<CatalogEntry> price_band_entries() const {
        std::vector<CatalogEntry> out;
        out.reserve(price_bands.size());
        for (const auto& b : price_bands) {
            std::int64_t mid = b.max_minor == INT64_MAX ? b.min_minor + 750
                                                        : (b.min_minor + b.max_minor) / 2;
            out.push_back({b.id, b.display, "price_band", "", mid});
        }
        return out;
    }

    const PriceBand& band_for_price(std::int64_t price_minor) const {
        for (const auto& b : price_bands) {
            if (price_minor >= b.min_minor && price_minor <= b.max_minor) return b;
        }
        return price_bands.back();
    }

    std::vector<const CatalogEntry*> merchants_of_category(const std::string& category) const {
        std::vector<const CatalogEntry*> out;
        for (const auto& m : merchants) {
            if (m.category == category) out.push_back(&m);
        }
        return out;
    }

    std::vector<const CatalogEntry*> products_of_category(const std::string& category) const {
        std::vector<const CatalogEntry*> out;
        for (const auto& p : products) {
            if (p.category == category) out.push_back(&p);
        }
        return out;
    }

    std::int64_t max_price_minor() const {
        std::int64_t mx = 1;
        for (const auto& m : merchants) {
            if (m.price_minor) mx = std::max(mx, *m.price_minor);
        }
        for (const auto& p : products) {
            if (p.price_minor) mx = std::max(mx, *p.price_minor);
        }
        return mx;
    }
};

inline std::string zero_pad(std::size_t value, std::size_t width) {
    std::string s = std::to_string(value);
    while (s.size() < width) s.insert(s.begin(), '0');
    return s;
}

// The fixed synthetic catalog: 30 categories, 200 merchants, 1000 products,
// 4 price bands. Small enough for exhaustive oracle checks.
inline const Catalog& default_catalog() {
    static const Catalog catalog = [] {
        Catalog c;
        c.categories = {
            "Sichuan",     "Cantonese",  "Hunan",         "Dumplings",  "Hotpot",
            "Noodles",     "Dessert",    "Bubble Tea",    "Japanese",   "Korean",
            "Thai",        "Indian",     "Pizza",         "Burgers",    "Fried Chicken",
            "Salad",       "Sushi",      "BBQ Skewers",   "Dim Sum",    "Congee",
            "Bakery",      "Coffee",     "Juice",         "Seafood",    "Vegetarian",
            "Malatang",    "Rice Bowls", "Sandwiches",    "Soup",       "Breakfast"};
        for (std::size_t i = 0; i < 200; ++i) {
            const std::string& cat = c.categories[i % c.categories.size()];
            CatalogEntry m;
            m.id = "m" + zero_pad(i, 3);
            m.display = cat + " House " + zero_pad(i, 3);
            m.kind = "merchant";
            m.category = cat;
            m.price_minor = 1000 + 250 * static_cast<std::int64_t>(i % 13);
            c.merchants.push_back(std::move(m));
        }
        for (std::size_t i = 0; i < 1000; ++i) {
            const std::string& cat = c.categories[i % c.categories.size()];
            CatalogEntry p;
            p.id = "p" + zero_pad(i, 4);
            p.display = cat + " Dish " + zero_pad(i, 4);
            p.kind = "product";
            p.category = cat;
            p.price_minor = 600 + 45 * static_cast<std::int64_t>(i % 80);
            c.products.push_back(std::move(p));
        }
        c.price_bands = {
            {"pb_low", "under 15.00", 0, 1499},
            {"pb_mid", "15.00 to 24.99", 1500, 2499},
            {"pb_high", "25.00 to 39.99", 2500, 3999},
            {"pb_premium", "40.00 and up", 4000, INT64_MAX},
        };
        return c;
    }();
    return catalog;
}

inline json catalog_entry_to_json(const CatalogEntry& e) {
    json j;
    j["id"] = e.id;
    j["display"] = e.display;
    j["kind"] = e.kind;
    j["category"] = e.category;
    if (e.price_minor) j["price_minor"] = *e.price_minor;
    return j;
}

inline CatalogEntry catalog_entry_from_json(const json& j) {
    CatalogEntry e;
    e.id = j.at("id").get<std::string>();
    e.display = j.at("display").get<std::string>();
    e.kind = j.at("kind").get<std::string>();
    e.category = j.value("category", std::string());
    if (j.contains("price_minor")) e.price_minor = j.at("price_minor").get<std::int64_t>();
    return e;
}

inline void save_catalog(const Catalog& c, const std::filesystem::path& path) {
    std::vector<json> records;
    for (const auto& e : c.category_entries()) records.push_back(catalog_entry_to_json(e));
    for (const auto& e : c.merchants) records.push_back(catalog_entry_to_json(e));
    for (const auto& e : c.products) records.push_back(catalog_entry_to_json(e));
    for (const auto& b : c.price_bands) {
        json j;
        j["id"] = b.id;
        j["display"] = b.display;
        j["kind"] = "price_band";
        j["category"] = "";
        j["min_minor"] = b.min_minor;
        j["max_minor"] = b.max_minor;
        records.push_back(std::move(j));
    }
    write_jsonl(path, records);
}

inline Catalog load_catalog(const std::filesystem::path& path) {
    Catalog c;
    for (const auto& j : read_jsonl(path)) {
        std::string kind = j.at("kind").get<std::string>();
        if (kind == "category") {
            c.categories.push_back(j.at("display").get<std::string>());
        } else if (kind == "merchant") {
            c.merchants.push_back(catalog_entry_from_json(j));
        } else if (kind == "product") {
            c.products.push_back(catalog_entry_from_json(j));
        } else if (kind == "price_band") {
            PriceBand b;
            b.id = j.at("id").get<std::string>();
            b.display = j.at("display").get<std::string>();
            b.min_minor = j.at("min_minor").get<std::int64_t>();
            b.max_minor = j.at("max_minor").get<std::int64_t>();
            c.price_bands.push_back(std::move(b));
        } else {
            throw JsonlError("unknown catalog entry kind: " + kind);
        }
    }
    return c;
}

}  // namespace hkfr
