// Token pair + profile kept in browser local storage. Passwords are never
// stored anywhere; logout purges everything.

export interface TokenPair {
  access_token: string;
  renew_token: string;
}

export interface Profile {
  account_id: string;
  email: string;
  role: string;
  first_name?: string;
  last_name?: string;
  courier?: { courier_id: string; vehicle_class: string; is_available: boolean };
}

const STORAGE_KEY = "crowdship.session";

export class Session {
  private listeners: Array<() => void> = [];
  profile: Profile | null = null;

  constructor(private storage: Storage = window.localStorage) {}

  get tokens(): TokenPair | null {
    const raw = this.storage.getItem(STORAGE_KEY);
    if (!raw) return null;
    try {
      const parsed = JSON.parse(raw);
      if (parsed.access_token && parsed.renew_token) return parsed;
    } catch {
      // fall through: corrupt entry is treated as logged out
    }
    this.storage.removeItem(STORAGE_KEY);
    return null;
  }

  get loggedIn(): boolean {
    return this.tokens !== null;
  }

  setTokens(pair: TokenPair): void {
    this.storage.setItem(
      STORAGE_KEY,
      JSON.stringify({ access_token: pair.access_token, renew_token: pair.renew_token }),
    );
    this.emit();
  }

  clear(): void {
    this.storage.removeItem(STORAGE_KEY);
    this.profile = null;
    this.emit();
  }

  onChange(fn: () => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }
}
