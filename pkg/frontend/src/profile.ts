// Dietary profile: selected diets and excluded allergen categories.
// Persisted only in the browser via a storage object; injected the profile
// travels as a natural-language prefix on the question so the service API
// stays unchanged.

import type { UserProfile } from "./types.js";

export const DIETS: readonly string[] = [
  "vegetarian", "vegan", "pescatarian", "gluten_free", "lactose_free",
  "dairy_free", "egg_free", "nut_free", "soy_free", "shellfish_free",
  "fish_free", "diabetic", "low_sodium", "low_fat", "halal", "kosher",
  "hindu", "buddhist", "unrestricted",
];

export const ALLERGEN_CATEGORIES: ReadonlyArray<{ id: number; name: string }> = [
  { id: 1, name: "cereals containing gluten" },
  { id: 2, name: "crustaceans" },
  { id: 3, name: "eggs" },
  { id: 4, name: "fish" },
  { id: 5, name: "peanuts" },
  { id: 6, name: "soybeans" },
  { id: 7, name: "milk" },
  { id: 8, name: "nuts" },
  { id: 9, name: "celery" },
  { id: 10, name: "mustard" },
  { id: 11, name: "sesame seeds" },
  { id: 12, name: "sulphur dioxide and sulphites" },
  { id: 13, name: "lupin" },
  { id: 14, name: "molluscs" },
];

const STORAGE_KEY = "foodkg.profile.v1";

export function emptyProfile(): UserProfile {
  return { diets: [], excludedAllergens: [] };
}

/** Minimal key-value storage; window.localStorage satisfies it. */
export interface KeyValueStorage {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export class ProfileStore {
  constructor(private readonly storage: KeyValueStorage) {}

  load(): UserProfile {
    const raw = this.storage.getItem(STORAGE_KEY);
    if (raw === null) return emptyProfile();
    try {
      const parsed = JSON.parse(raw) as Partial<UserProfile>;
      const diets = Array.isArray(parsed.diets)
        ? parsed.diets.filter((d): d is string => DIETS.includes(d as string))
        : [];
      const allergenIds = new Set(ALLERGEN_CATEGORIES.map((a) => a.id));
      const excludedAllergens = Array.isArray(parsed.excludedAllergens)
        ? parsed.excludedAllergens.filter(
            (a): a is number => typeof a === "number" && allergenIds.has(a),
          )
        : [];
      return { diets, excludedAllergens };
    } catch {
      return emptyProfile();
    }
  }

  save(profile: UserProfile): void {
    this.storage.setItem(STORAGE_KEY, JSON.stringify(profile));
  }
}

function allergenName(id: number): string {
  const category = ALLERGEN_CATEGORIES.find((a) => a.id === id);
  return category ? category.name : `category ${id}`;
}

/** The natural-language constraint prefix added to outgoing questions. */
export function profilePrefix(profile: UserProfile): string {
  const parts: string[] = [];
  if (profile.diets.length > 0) {
    parts.push(
      `I follow these dietary restrictions: ${profile.diets.join(", ")}.`,
    );
  }
  if (profile.excludedAllergens.length > 0) {
    const names = profile.excludedAllergens
      .slice()
      .sort((a, b) => a - b)
      .map((id) => `${allergenName(id)} (category ${id})`);
    parts.push(`I must avoid these allergens: ${names.join(", ")}.`);
  }
  return parts.join(" ");
}

export function applyProfile(question: string, profile: UserProfile): string {
  const prefix = profilePrefix(profile);
  return prefix ? `${prefix} ${question}` : question;
}
