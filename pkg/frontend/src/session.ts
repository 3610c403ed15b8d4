/**
 * Rater session flow: fetch next item, commit a choice, advance.
 *
 * All state is authoritative on the server; this layer only tracks the
 * currently displayed item and an in-flight flag (the client-side
 * double-submit guard). A server conflict — the item was answered
 * elsewhere, or a retried POST landed twice — is treated as "recorded"
 * and the session skips forward.
 */
import {
  AuthError, Choice, ConflictError, ItemView, PayloadError, StudyClient, isDone,
} from './api';

export interface ViewHooks {
  showItem(item: ItemView): void;
  showDone(total: number): void;
  showError(message: string): void;
  onAuthFailure(): void;
}

/** Minimal Storage shape so tests can pass a plain object. */
export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export const STUDY_KEY = 'ecgstudy.study_id';
export const TOKEN_KEY = 'ecgstudy.rater_token';

export interface Credentials {
  studyId: string;
  raterToken: string;
}

export function loadCredentials(storage: StorageLike): Credentials | null {
  const studyId = storage.getItem(STUDY_KEY);
  const raterToken = storage.getItem(TOKEN_KEY);
  return studyId && raterToken ? { studyId, raterToken } : null;
}

export function saveCredentials(storage: StorageLike, creds: Credentials): void {
  storage.setItem(STUDY_KEY, creds.studyId);
  storage.setItem(TOKEN_KEY, creds.raterToken);
}

export function clearCredentials(storage: StorageLike): void {
  storage.removeItem(STUDY_KEY);
  storage.removeItem(TOKEN_KEY);
}

export class Session {
  private current: ItemView | null = null;
  private submitting = false;

  constructor(private client: StudyClient, private view: ViewHooks) {}

  /** Resume from server state: shows the first unanswered item. */
  async start(): Promise<void> {
    await this.advance();
  }

  /**
   * Commit the choice for the displayed item. Ignored while a submit is
   * already in flight, so a double-click yields exactly one annotation.
   */
  async choose(label: Choice): Promise<void> {
    if (this.submitting || this.current === null) return;
    this.submitting = true;
    const item = this.current;
    try {
      await this.client.submit(item.item_id, label);
    } catch (err) {
      if (!(err instanceof ConflictError)) {
        this.submitting = false;
        this.dispatchError(err);
        return;
      }
      // Conflict: already answered; fall through and advance.
    }
    this.submitting = false;
    this.current = null;
    await this.advance();
  }

  /** Re-fetch after an error; wired to the error panel's retry button. */
  async retry(): Promise<void> {
    await this.advance();
  }

  private async advance(): Promise<void> {
    let resp;
    try {
      resp = await this.client.next();
    } catch (err) {
      this.dispatchError(err);
      return;
    }
    if (isDone(resp)) {
      this.current = null;
      this.view.showDone(resp.total);
    } else {
      this.current = resp;
      this.view.showItem(resp);
    }
  }

  private dispatchError(err: unknown): void {
    if (err instanceof AuthError) {
      this.view.onAuthFailure();
    } else if (err instanceof PayloadError) {
      this.view.showError(err.message);
    } else {
      this.view.showError(err instanceof Error ? err.message : String(err));
    }
  }
}
