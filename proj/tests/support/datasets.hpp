#pragma once

#include "sqlml/data/relation.hpp"
#include <cmath>
#include <random>
#include <string>

namespace sqlml::testing {

inline data::Value I(std::int64_t v) { return v; }

/// Observations over items x stores x dates with one-hot item categories and
/// store cities plus one numeric attribute each, for the sales fixture
inline data::Database sales_database(int items, int stores, int dates, unsigned seed) {
   std::mt19937 rng(seed);
   std::uniform_real_distribution<double> u(0, 1);
   data::Database db;
   data::Relation obs{"observations", {"itemID", "storeID", "dateID"}, {}}, sales{"sales", {"itemID", "storeID", "dateID", "v"}, {}};
   data::Relation item{"itemFeatures", {"itemID", "name", "v"}, {}}, store{"storeFeatures", {"storeID", "name", "v"}, {}};
   for (int i = 0; i < items; ++i) {
      item.rows.push_back({I(i), "category" + std::to_string(i % 4), 1.0});
      item.rows.push_back({I(i), std::string("price"), std::round(u(rng) * 100) / 10});
   }
   for (int s = 0; s < stores; ++s) {
      store.rows.push_back({I(s), "city" + std::to_string(s), 1.0});
      store.rows.push_back({I(s), std::string("size"), std::round(u(rng) * 50) / 10});
   }
   for (int i = 0; i < items; ++i)
      for (int s = 0; s < stores; ++s)
         for (int d = 0; d < dates; ++d) {
            obs.rows.push_back({I(i), I(s), I(d)});
            sales.rows.push_back({I(i), I(s), I(d), std::round(u(rng) * 40) / 4});
         }
   db["observations"] = obs;
   db["sales"] = sales;
   db["itemFeatures"] = item;
   db["storeFeatures"] = store;
   return db;
}

/// Data for the four-table model: 30 brands, 20 cities, 20 weeks, 10 promotion types
inline data::Database normalized4_database(unsigned seed) {
   std::mt19937 rng(seed);
   std::uniform_real_distribution<double> u(0, 1);
   const int items = 30, stores = 20, dates = 20, promos = 10;
   data::Database db;
   data::Relation obs{"observations", {"itemID", "storeID", "dateID"}, {}}, sales{"sales", {"itemID", "storeID", "dateID", "v"}, {}};
   data::Relation item{"itemFeatures", {"itemID", "name", "v"}, {}}, store{"storeFeatures", {"storeID", "name", "v"}, {}};
   data::Relation date{"dateFeatures", {"dateID", "name", "v"}, {}}, promo{"promoFeatures", {"itemID", "storeID", "name", "v"}, {}};
   for (int i = 0; i < items; ++i) item.rows.push_back({I(i), "brand" + std::to_string(i), 1.0});
   for (int s = 0; s < stores; ++s) store.rows.push_back({I(s), "city" + std::to_string(s), 1.0});
   for (int d = 0; d < dates; ++d) date.rows.push_back({I(d), "week" + std::to_string(d), 1.0});
   for (int i = 0; i < items; ++i)
      for (int s = 0; s < stores; ++s) promo.rows.push_back({I(i), I(s), "promo" + std::to_string((i + s) % promos), 1.0});
   for (int i = 0; i < items; ++i)
      for (int s = 0; s < stores; s += 5)
         for (int d = 0; d < dates; d += 4) {
            obs.rows.push_back({I(i), I(s), I(d)});
            sales.rows.push_back({I(i), I(s), I(d), std::round(u(rng) * 40) / 4});
         }
   db["observations"] = obs;
   db["sales"] = sales;
   db["itemFeatures"] = item;
   db["storeFeatures"] = store;
   db["dateFeatures"] = date;
   db["promoFeatures"] = promo;
   return db;
}

/// Housing-style regression data: 13 attributes on their usual scales and a
/// noisy linear target, in the single-table layout of the linear fixture
inline data::Database boston_database(int rows, unsigned seed) {
   struct Attr {
      const char* name;
      double lo, hi;
      double coef;
   };
   static const Attr attrs[] = {{"CRIM", 0, 20, -0.1},  {"ZN", 0, 100, 0.05},   {"INDUS", 0, 28, 0.02}, {"CHAS", 0, 1, 2.7},
                                {"NOX", 0.38, 0.87, -17}, {"RM", 3.5, 8.8, 3.8},  {"AGE", 3, 100, 0.0},  {"DIS", 1.1, 12, -1.5},
                                {"RAD", 1, 24, 0.3},     {"TAX", 187, 711, -0.01}, {"PTRATIO", 12, 22, -0.95}, {"B", 0.3, 397, 0.01},
                                {"LSTAT", 1.7, 38, -0.52}};
   std::mt19937 rng(seed);
   std::uniform_real_distribution<double> u(0, 1);
   std::normal_distribution<double> noise(0, 2);
   data::Database db;
   data::Relation f{"features", {"rowID", "featureName", "v"}, {}}, t{"targets", {"rowID", "v"}, {}};
   for (int r = 0; r < rows; ++r) {
      double y = 36;
      for (auto& a : attrs) {
         double v = a.name == std::string("CHAS") ? (u(rng) < 0.07 ? 1 : 0) : std::round((a.lo + u(rng) * (a.hi - a.lo)) * 100) / 100;
         y += a.coef * v;
         f.rows.push_back({I(r), std::string(a.name), v});
      }
      t.rows.push_back({I(r), std::round((y + noise(rng)) * 10) / 10});
   }
   db["features"] = f;
   db["targets"] = t;
   return db;
}

}
